//! C ABI for the federated RL laboratory core.
//!
//! Conventions:
//!
//! * Handles (`FedklMdp`, `FedklPolicy`) are opaque; create them with the
//!   `*_new` / `*_from_*` functions and release them with the matching
//!   `*_free`. Handles are immutable once created and safe to share across
//!   threads for reads.
//! * Every fallible function returns a [`FedklStatus`]; on failure a
//!   human-readable message is stored per thread and can be fetched with
//!   [`fedkl_last_error_message`].
//! * Output buffers are caller-allocated; sizes follow the handle's
//!   dimensions (`n_states`, `n_actions`).
//! * Strings returned by the library must be released with
//!   [`fedkl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fedkl::env::mean_episode_return;
use fedkl::fed::{run_federated_policy_iteration, Algorithm, FedConfig};
use fedkl::hetero::heterogeneity_report;
use fedkl::mdp::{FiniteMdp, TabularPolicy};
use fedkl::rng::RngStream;
use fedkl::sweep::{run_bound_sweep, SweepSizes};
use fedkl::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FedklStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    SolverError = 4,
    UnreachableState = 5,
    IoError = 6,
    Panic = 7,
}

/// Opaque finite-MDP handle.
pub struct FedklMdp {
    inner: FiniteMdp,
}

/// Opaque tabular-policy handle.
pub struct FedklPolicy {
    inner: TabularPolicy,
}

/// Per-agent heterogeneity summary (plain data, C layout).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FedklAgentReport {
    pub b_norm: f64,
    pub a_norm: f64,
    pub g_scaled: f64,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> FedklStatus {
    match err {
        Error::Shape(_) | Error::Distribution(_) | Error::Config(_) => FedklStatus::InvalidArgument,
        Error::UnreachableState { .. } => FedklStatus::UnreachableState,
        Error::Solver(_) => FedklStatus::SolverError,
        Error::Io(_) => FedklStatus::IoError,
        Error::Json(_) => FedklStatus::ParseError,
    }
}

fn fail(err: Error) -> FedklStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Runs `f` with panics converted to `FedklStatus::Panic`.
fn guarded(f: impl FnOnce() -> FedklStatus) -> FedklStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic crossed the ffi boundary");
            FedklStatus::Panic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

macro_rules! require {
    ($cond:expr, $msg:expr) => {
        if !$cond {
            set_error($msg);
            return FedklStatus::NullPointer;
        }
    };
}

/// Copies the last error message of this thread into `buffer` (truncated,
/// always NUL-terminated) and returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn fedkl_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn fedkl_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

// --- MDP handles ------------------------------------------------------------

/// Parses an MDP from its JSON document form.
#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_from_json(
    json: *const c_char,
    out: *mut *mut FedklMdp,
) -> FedklStatus {
    guarded(|| {
        require!(!out.is_null(), "out pointer is null");
        let Some(text) = cstr_arg(json) else {
            set_error("json argument is null or not UTF-8");
            return FedklStatus::NullPointer;
        };
        match FiniteMdp::from_json_str(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FedklMdp { inner }));
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Reads an MDP JSON document from disk.
#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_from_file(
    path: *const c_char,
    out: *mut *mut FedklMdp,
) -> FedklStatus {
    guarded(|| {
        require!(!out.is_null(), "out pointer is null");
        let Some(path) = cstr_arg(path) else {
            set_error("path argument is null or not UTF-8");
            return FedklStatus::NullPointer;
        };
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(err) => return fail(Error::Io(err)),
        };
        match FiniteMdp::from_json_str(&text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FedklMdp { inner }));
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Serializes the MDP back to its JSON form (17 significant digits).
#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_to_json(
    mdp: *const FedklMdp,
    out: *mut *mut c_char,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null(), "mdp handle is null");
        require!(!out.is_null(), "out pointer is null");
        let text = (*mdp).inner.to_json_string();
        match CString::new(text) {
            Ok(cstring) => {
                *out = cstring.into_raw();
                FedklStatus::Ok
            }
            Err(_) => {
                set_error("serialized document contained an interior NUL");
                FedklStatus::InvalidArgument
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_free(mdp: *mut FedklMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_n_states(mdp: *const FedklMdp) -> usize {
    if mdp.is_null() {
        return 0;
    }
    (*mdp).inner.n_states()
}

#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_n_actions(mdp: *const FedklMdp) -> usize {
    if mdp.is_null() {
        return 0;
    }
    (*mdp).inner.n_actions()
}

#[no_mangle]
pub unsafe extern "C" fn fedkl_mdp_gamma(mdp: *const FedklMdp) -> f64 {
    if mdp.is_null() {
        return f64::NAN;
    }
    (*mdp).inner.gamma()
}

// --- policy handles ----------------------------------------------------------

/// Uniform policy over `n_actions` in every state.
#[no_mangle]
pub unsafe extern "C" fn fedkl_policy_uniform(
    n_states: usize,
    n_actions: usize,
    out: *mut *mut FedklPolicy,
) -> FedklStatus {
    guarded(|| {
        require!(!out.is_null(), "out pointer is null");
        if n_states == 0 || n_actions == 0 {
            set_error("policy dimensions must be positive");
            return FedklStatus::InvalidArgument;
        }
        let inner = TabularPolicy::uniform(n_states, n_actions);
        *out = Box::into_raw(Box::new(FedklPolicy { inner }));
        FedklStatus::Ok
    })
}

/// Builds a policy from a row-major `n_states x n_actions` probability table.
#[no_mangle]
pub unsafe extern "C" fn fedkl_policy_from_rows(
    probs: *const f64,
    n_states: usize,
    n_actions: usize,
    out: *mut *mut FedklPolicy,
) -> FedklStatus {
    guarded(|| {
        require!(!out.is_null(), "out pointer is null");
        require!(!probs.is_null(), "probs pointer is null");
        let flat = std::slice::from_raw_parts(probs, n_states * n_actions);
        let rows: Vec<Vec<f64>> = flat.chunks(n_actions).map(|chunk| chunk.to_vec()).collect();
        match TabularPolicy::new(rows) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FedklPolicy { inner }));
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Copies the policy table into `out` (row-major, `n_states * n_actions`).
#[no_mangle]
pub unsafe extern "C" fn fedkl_policy_get_rows(
    policy: *const FedklPolicy,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!policy.is_null(), "policy handle is null");
        require!(!out.is_null(), "out buffer is null");
        let inner = &(*policy).inner;
        let n_actions = inner.n_actions();
        for s in 0..inner.n_states() {
            for a in 0..n_actions {
                *out.add(s * n_actions + a) = inner.prob(s, a);
            }
        }
        FedklStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn fedkl_policy_free(policy: *mut FedklPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

// --- exact solvers ------------------------------------------------------------

/// Expected discounted return `eta = mu . V`.
#[no_mangle]
pub unsafe extern "C" fn fedkl_expected_return(
    mdp: *const FedklMdp,
    policy: *const FedklPolicy,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !policy.is_null(), "handle is null");
        require!(!out.is_null(), "out pointer is null");
        match (*mdp).inner.expected_return(&(*policy).inner) {
            Ok(eta) => {
                *out = eta;
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// State values V (buffer of `n_states`).
#[no_mangle]
pub unsafe extern "C" fn fedkl_state_values(
    mdp: *const FedklMdp,
    policy: *const FedklPolicy,
    out_v: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !policy.is_null(), "handle is null");
        require!(!out_v.is_null(), "out buffer is null");
        match (*mdp).inner.policy_evaluation(&(*policy).inner) {
            Ok(tables) => {
                std::ptr::copy_nonoverlapping(tables.v.as_ptr(), out_v, tables.v.len());
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Advantage table A (row-major buffer of `n_states * n_actions`).
#[no_mangle]
pub unsafe extern "C" fn fedkl_advantages(
    mdp: *const FedklMdp,
    policy: *const FedklPolicy,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !policy.is_null(), "handle is null");
        require!(!out.is_null(), "out buffer is null");
        match (*mdp).inner.policy_evaluation(&(*policy).inner) {
            Ok(tables) => {
                let n_actions = tables.adv[0].len();
                for (s, row) in tables.adv.iter().enumerate() {
                    for (a, &value) in row.iter().enumerate() {
                        *out.add(s * n_actions + a) = value;
                    }
                }
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Unnormalized discounted visitation frequencies (buffer of `n_states`).
#[no_mangle]
pub unsafe extern "C" fn fedkl_visitation(
    mdp: *const FedklMdp,
    policy: *const FedklPolicy,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !policy.is_null(), "handle is null");
        require!(!out.is_null(), "out buffer is null");
        match (*mdp).inner.visitation_frequency(&(*policy).inner) {
            Ok(table) => {
                std::ptr::copy_nonoverlapping(table.rho.as_ptr(), out, table.rho.len());
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Policy advantage of `cand` over `base`.
#[no_mangle]
pub unsafe extern "C" fn fedkl_policy_advantage(
    mdp: *const FedklMdp,
    base: *const FedklPolicy,
    cand: *const FedklPolicy,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !base.is_null() && !cand.is_null(), "handle is null");
        require!(!out.is_null(), "out pointer is null");
        match (*mdp).inner.policy_advantage(&(*base).inner, &(*cand).inner) {
            Ok(gain) => {
                *out = gain;
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Monte-Carlo mean episode return, seeded and reproducible.
#[no_mangle]
pub unsafe extern "C" fn fedkl_mc_return(
    mdp: *const FedklMdp,
    policy: *const FedklPolicy,
    n_episodes: usize,
    horizon: usize,
    seed: u64,
    out: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!mdp.is_null() && !policy.is_null(), "handle is null");
        require!(!out.is_null(), "out pointer is null");
        if n_episodes == 0 || horizon == 0 {
            set_error("episode budget must be positive");
            return FedklStatus::InvalidArgument;
        }
        let mut stream = RngStream::from_seed(seed);
        *out =
            mean_episode_return(&(*mdp).inner, &(*policy).inner, n_episodes, horizon, &mut stream);
        FedklStatus::Ok
    })
}

// --- heterogeneity analysis ----------------------------------------------------

/// Per-agent heterogeneity report for a family of MDP handles under a shared
/// policy. `out_agents` must hold `n_agents` entries; `out_beta` receives the
/// shared trust coefficient.
#[no_mangle]
pub unsafe extern "C" fn fedkl_heterogeneity_report(
    family: *const *const FedklMdp,
    weights: *const f64,
    n_agents: usize,
    policy: *const FedklPolicy,
    out_agents: *mut FedklAgentReport,
    out_beta: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!family.is_null() && !policy.is_null(), "handle is null");
        require!(
            !weights.is_null() && !out_agents.is_null() && !out_beta.is_null(),
            "buffer is null"
        );
        if n_agents == 0 {
            set_error("family must contain at least one agent");
            return FedklStatus::InvalidArgument;
        }
        let handles = std::slice::from_raw_parts(family, n_agents);
        if handles.iter().any(|h| h.is_null()) {
            set_error("family contains a null handle");
            return FedklStatus::NullPointer;
        }
        let mdps: Vec<FiniteMdp> = handles.iter().map(|h| (**h).inner.clone()).collect();
        let weights = std::slice::from_raw_parts(weights, n_agents);
        match heterogeneity_report(&mdps, weights, &(*policy).inner) {
            Ok(report) => {
                for (i, agent) in report.agents.iter().enumerate() {
                    *out_agents.add(i) = FedklAgentReport {
                        b_norm: agent.b_norm,
                        a_norm: agent.a_norm,
                        g_scaled: agent.g_scaled,
                        alpha: agent.alpha,
                        delta: agent.delta,
                        epsilon: agent.epsilon,
                    };
                }
                *out_beta = report.beta;
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

// --- certification and training --------------------------------------------------

/// Runs the bound-certification sweep; sets `out_all_hold` to 1 when every
/// check holds. Sizes fall back to the standard (12 states, 4 actions,
/// 5 agents) envelope.
#[no_mangle]
pub unsafe extern "C" fn fedkl_run_bound_sweep(
    n_seeds: u64,
    master_seed: u64,
    out_all_hold: *mut i32,
) -> FedklStatus {
    guarded(|| {
        require!(!out_all_hold.is_null(), "out pointer is null");
        match run_bound_sweep(n_seeds, master_seed, &SweepSizes::default(), false) {
            Ok(records) => {
                *out_all_hold = records.iter().all(|r| r.check.holds) as i32;
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Exact federated policy iteration over a family of MDP handles with
/// uniform weights. Writes the `rounds + 1` global-return series into
/// `out_eta`; the series is non-decreasing by construction.
#[no_mangle]
pub unsafe extern "C" fn fedkl_run_exact_federation(
    family: *const *const FedklMdp,
    n_agents: usize,
    rounds: usize,
    master_seed: u64,
    out_eta: *mut f64,
) -> FedklStatus {
    guarded(|| {
        require!(!family.is_null() && !out_eta.is_null(), "pointer is null");
        if n_agents == 0 {
            set_error("family must contain at least one agent");
            return FedklStatus::InvalidArgument;
        }
        let handles = std::slice::from_raw_parts(family, n_agents);
        if handles.iter().any(|h| h.is_null()) {
            set_error("family contains a null handle");
            return FedklStatus::NullPointer;
        }
        let mdps: Vec<FiniteMdp> = handles.iter().map(|h| (**h).inner.clone()).collect();
        let config = FedConfig {
            n_agents,
            participants_per_round: n_agents,
            local_iters: 1,
            timesteps: 1,
            epochs: 1,
            weights: None,
            sample_counts: None,
            rounds,
            master_seed,
            algorithm: Algorithm::ExactTabular,
            d_local: 0.003,
            d_global: 0.5,
            c1_init: 1.0,
            c2_init: 1.0,
            fedprox_mu: 0.02,
            record_heterogeneity: false,
        };
        match run_federated_policy_iteration(&config, &mdps, 1) {
            Ok(history) => {
                let etas = history.eta_series();
                std::ptr::copy_nonoverlapping(etas.as_ptr(), out_eta, etas.len());
                FedklStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}
