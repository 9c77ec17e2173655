//! C ABI for the sitkg toolkit.
//!
//! Handles (`SitkgGraph`, `SitkgSplit`) are opaque pointers owned by Rust
//! and released with the matching `_free` function. Every fallible call
//! returns a [`SitkgStatus`]; on failure a human-readable message is
//! available from [`sitkg_last_error`] until the next call on the same
//! thread. The generated header lives at `include/sitkg.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use sitkg::baselines::{self, PredictionTask, Variant};
use sitkg::eval::{self, BaselinePredictor, RandomRanker};
use sitkg::graph::SituationalGraph;
use sitkg::ingest::AssociationPolicy;
use sitkg::split::{self, Split};
use sitkg::stats;
use sitkg::synth::{self, SynthConfig};
use sitkg::tsv;
use sitkg::vocab::Vocabulary;

/// Opaque graph handle.
pub struct SitkgGraph {
    inner: SituationalGraph,
}

/// Opaque split handle.
pub struct SitkgSplit {
    inner: Split,
}

/// Call outcome. Anything other than `Ok` leaves a message in
/// `sitkg_last_error`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SitkgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    ParseError = 4,
    DataError = 5,
}

/// Graph statistics panel. `density` and `degree_assortativity` are NaN
/// when undefined (fewer than two nodes, or a constant degree sequence).
#[repr(C)]
pub struct SitkgStats {
    pub node_count: u64,
    pub edge_count: u64,
    pub density: f64,
    pub avg_in_degree: f64,
    pub avg_out_degree: f64,
    pub max_in_degree: u64,
    pub max_out_degree: u64,
    pub scc_count: u64,
    pub wcc_count: u64,
    pub avg_clustering: f64,
    pub degree_assortativity: f64,
    pub reciprocity: f64,
}

/// Hits@k metrics for one evaluation run.
#[repr(C)]
pub struct SitkgMetrics {
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_5: f64,
    pub queries: u64,
}

/// Prediction task selector.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SitkgTask {
    Parent = 0,
    Next = 1,
}

/// Baseline variant selector.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum SitkgVariant {
    B1 = 1,
    B2 = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).unwrap_or_default();
    });
}

fn fail(status: SitkgStatus, message: impl Into<String>) -> SitkgStatus {
    set_error(message);
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sitkg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn path_arg<'a>(raw: *const c_char) -> Result<&'a Path, SitkgStatus> {
    if raw.is_null() {
        return Err(fail(SitkgStatus::NullArgument, "path is NULL"));
    }
    match CStr::from_ptr(raw).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(SitkgStatus::InvalidArgument, "path is not UTF-8")),
    }
}

fn task_of(task: SitkgTask) -> PredictionTask {
    match task {
        SitkgTask::Parent => PredictionTask::Parent,
        SitkgTask::Next => PredictionTask::Next,
    }
}

/// Reads a graph from a triple TSV file (with its companion node file).
///
/// # Safety
/// `triples_path` must be a NUL-terminated string and `out` a valid
/// pointer; on `Ok` the caller owns the handle and must release it with
/// [`sitkg_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_read(
    triples_path: *const c_char,
    out: *mut *mut SitkgGraph,
) -> SitkgStatus {
    if out.is_null() {
        return fail(SitkgStatus::NullArgument, "out is NULL");
    }
    let path = match path_arg(triples_path) {
        Ok(path) => path,
        Err(status) => return status,
    };
    match tsv::read_graph(path) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SitkgGraph { inner: graph }));
            SitkgStatus::Ok
        }
        Err(e @ tsv::TsvError::Io { .. }) => fail(SitkgStatus::IoError, e.to_string()),
        Err(e) => fail(SitkgStatus::ParseError, e.to_string()),
    }
}

/// Writes the graph as canonical triple and node TSV files.
///
/// # Safety
/// `graph` must be a live handle from this library; `triples_path` a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_write(
    graph: *const SitkgGraph,
    triples_path: *const c_char,
) -> SitkgStatus {
    if graph.is_null() {
        return fail(SitkgStatus::NullArgument, "graph is NULL");
    }
    let path = match path_arg(triples_path) {
        Ok(path) => path,
        Err(status) => return status,
    };
    match tsv::write_graph(&(*graph).inner, path) {
        Ok(()) => SitkgStatus::Ok,
        Err(e) => fail(SitkgStatus::IoError, e.to_string()),
    }
}

/// Builds the deterministic synthetic corpus and its graph in one call.
///
/// # Safety
/// `out` must be a valid pointer; the returned handle is owned by the
/// caller and released with [`sitkg_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_synthetic(
    tasks: usize,
    subjects: usize,
    takes: usize,
    seed: u64,
    deterministic: bool,
    min_overlap: f64,
    out: *mut *mut SitkgGraph,
) -> SitkgStatus {
    if out.is_null() {
        return fail(SitkgStatus::NullArgument, "out is NULL");
    }
    let mut config = SynthConfig::new(tasks, subjects, takes);
    config.deterministic = deterministic;
    let annotations = match synth::generate_synthetic(&config, seed) {
        Ok(annotations) => annotations,
        Err(e) => return fail(SitkgStatus::InvalidArgument, e.to_string()),
    };
    let policy = match AssociationPolicy::new(min_overlap) {
        Ok(policy) => policy,
        Err(e) => return fail(SitkgStatus::InvalidArgument, e.to_string()),
    };
    let components = synth::components_from_annotations(&annotations, &policy);
    match SituationalGraph::build_graph(&components, &Vocabulary::default()) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SitkgGraph { inner: graph }));
            SitkgStatus::Ok
        }
        Err(e) => fail(SitkgStatus::DataError, e.to_string()),
    }
}

/// Releases a graph handle. NULL is a no-op.
///
/// # Safety
/// `graph` must be NULL or a handle returned by this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_free(graph: *mut SitkgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_node_count(graph: *const SitkgGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.node_count()
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_edge_count(graph: *const SitkgGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.triple_count()
}

/// Number of structural invariant violations (0 for a well-formed graph).
///
/// # Safety
/// `graph` must be a live handle; `violations` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_validate(
    graph: *const SitkgGraph,
    violations: *mut usize,
) -> SitkgStatus {
    if graph.is_null() {
        return fail(SitkgStatus::NullArgument, "graph is NULL");
    }
    let found = (*graph).inner.validate(&Vocabulary::default());
    if !violations.is_null() {
        *violations = found.len();
    }
    if found.is_empty() {
        SitkgStatus::Ok
    } else {
        let rendered: Vec<String> = found.iter().take(5).map(|v| v.to_string()).collect();
        fail(SitkgStatus::DataError, rendered.join("; "))
    }
}

/// Fills the statistics panel.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sitkg_graph_stats(
    graph: *const SitkgGraph,
    out: *mut SitkgStats,
) -> SitkgStatus {
    if graph.is_null() || out.is_null() {
        return fail(SitkgStatus::NullArgument, "graph or out is NULL");
    }
    let s = stats::compute_stats(&(*graph).inner);
    *out = SitkgStats {
        node_count: s.node_count as u64,
        edge_count: s.edge_count as u64,
        density: s.density.unwrap_or(f64::NAN),
        avg_in_degree: s.avg_in_degree,
        avg_out_degree: s.avg_out_degree,
        max_in_degree: s.max_in_degree as u64,
        max_out_degree: s.max_out_degree as u64,
        scc_count: s.scc_count as u64,
        wcc_count: s.wcc_count as u64,
        avg_clustering: s.avg_clustering,
        degree_assortativity: s.degree_assortativity.unwrap_or(f64::NAN),
        reciprocity: s.reciprocity,
    };
    SitkgStatus::Ok
}

/// Holds out the `test_takes` highest takes per (task, subject).
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer; the returned
/// handle is released with [`sitkg_split_free`].
#[no_mangle]
pub unsafe extern "C" fn sitkg_split_by_take(
    graph: *const SitkgGraph,
    test_takes: usize,
    out: *mut *mut SitkgSplit,
) -> SitkgStatus {
    if graph.is_null() || out.is_null() {
        return fail(SitkgStatus::NullArgument, "graph or out is NULL");
    }
    match split::split_by_take(&(*graph).inner, test_takes) {
        Ok(split) => {
            *out = Box::into_raw(Box::new(SitkgSplit { inner: split }));
            SitkgStatus::Ok
        }
        Err(e) => fail(SitkgStatus::DataError, e.to_string()),
    }
}

/// Releases a split handle. NULL is a no-op.
///
/// # Safety
/// `split` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sitkg_split_free(split: *mut SitkgSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// # Safety
/// `split` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sitkg_split_test_component_count(split: *const SitkgSplit) -> usize {
    if split.is_null() {
        return 0;
    }
    (*split).inner.test_components.len()
}

/// Writes the split manifest as TSV.
///
/// # Safety
/// `split` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sitkg_split_write_manifest(
    split: *const SitkgSplit,
    path: *const c_char,
) -> SitkgStatus {
    if split.is_null() {
        return fail(SitkgStatus::NullArgument, "split is NULL");
    }
    let path = match path_arg(path) {
        Ok(path) => path,
        Err(status) => return status,
    };
    match split::write_manifest(&(*split).inner.manifest, path) {
        Ok(()) => SitkgStatus::Ok,
        Err(e) => fail(SitkgStatus::IoError, e.to_string()),
    }
}

/// Fits the requested frequency baseline on the split's train side and
/// evaluates it on the held-out components.
///
/// # Safety
/// `split` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sitkg_eval_baseline(
    split: *const SitkgSplit,
    task: SitkgTask,
    variant: SitkgVariant,
    out: *mut SitkgMetrics,
) -> SitkgStatus {
    if split.is_null() || out.is_null() {
        return fail(SitkgStatus::NullArgument, "split or out is NULL");
    }
    let split = &(*split).inner;
    let vocab = Vocabulary::default();
    let fit = match variant {
        SitkgVariant::B1 => Variant::B1,
        SitkgVariant::B2 => Variant::B2,
    };
    let table = match task_of(task) {
        PredictionTask::Parent => baselines::fit_parent(&split.train, fit, &vocab),
        PredictionTask::Next => baselines::fit_next(&split.train, fit, &vocab),
    };
    let table = match table {
        Ok(table) => table,
        Err(e) => return fail(SitkgStatus::DataError, e.to_string()),
    };
    evaluate_into(split, task, &BaselinePredictor { table }, out)
}

/// Evaluates the seeded uniform-random ranker.
///
/// # Safety
/// `split` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sitkg_eval_random(
    split: *const SitkgSplit,
    task: SitkgTask,
    seed: u64,
    out: *mut SitkgMetrics,
) -> SitkgStatus {
    if split.is_null() || out.is_null() {
        return fail(SitkgStatus::NullArgument, "split or out is NULL");
    }
    evaluate_into(&(*split).inner, task, &RandomRanker { seed }, out)
}

unsafe fn evaluate_into<P>(
    split: &Split,
    task: SitkgTask,
    predictor: &P,
    out: *mut SitkgMetrics,
) -> SitkgStatus
where
    P: eval::ParentPredictor + eval::NextPredictor,
{
    let vocab = Vocabulary::default();
    let (parent_queries, next_queries) = match eval::build_queries(&split.test_components, &vocab)
    {
        Ok(queries) => queries,
        Err(e) => return fail(SitkgStatus::DataError, e.to_string()),
    };
    let row = match task_of(task) {
        PredictionTask::Parent => eval::evaluate_parent(predictor, &parent_queries, 1),
        PredictionTask::Next => eval::evaluate_next(predictor, &next_queries, 1),
    };
    match row {
        Ok(row) => {
            *out = SitkgMetrics {
                hits_at_1: row.hits_at_1,
                hits_at_3: row.hits_at_3,
                hits_at_5: row.hits_at_5,
                queries: row.queries as u64,
            };
            SitkgStatus::Ok
        }
        Err(e) => fail(SitkgStatus::DataError, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    unsafe fn synthetic(tasks: usize, takes: usize) -> *mut SitkgGraph {
        let mut graph: *mut SitkgGraph = ptr::null_mut();
        let status = sitkg_graph_synthetic(tasks, 2, takes, 1, false, 0.5, &mut graph);
        assert!(matches!(status, SitkgStatus::Ok));
        assert!(!graph.is_null());
        graph
    }

    #[test]
    fn handles_round_trip_through_files() {
        unsafe {
            let graph = synthetic(3, 3);
            let dir = tempfile::tempdir().unwrap();
            let path =
                CString::new(dir.path().join("graph.tsv").display().to_string()).unwrap();
            assert!(matches!(
                sitkg_graph_write(graph, path.as_ptr()),
                SitkgStatus::Ok
            ));
            let mut reread: *mut SitkgGraph = ptr::null_mut();
            assert!(matches!(
                sitkg_graph_read(path.as_ptr(), &mut reread),
                SitkgStatus::Ok
            ));
            assert_eq!(
                sitkg_graph_node_count(graph),
                sitkg_graph_node_count(reread)
            );
            assert_eq!(
                sitkg_graph_edge_count(graph),
                sitkg_graph_edge_count(reread)
            );
            let mut violations = usize::MAX;
            assert!(matches!(
                sitkg_graph_validate(reread, &mut violations),
                SitkgStatus::Ok
            ));
            assert_eq!(violations, 0);
            sitkg_graph_free(graph);
            sitkg_graph_free(reread);
        }
    }

    #[test]
    fn stats_and_split_and_eval() {
        unsafe {
            let graph = synthetic(3, 4);
            let mut stats = std::mem::zeroed::<SitkgStats>();
            assert!(matches!(
                sitkg_graph_stats(graph, &mut stats),
                SitkgStatus::Ok
            ));
            assert_eq!(stats.node_count, sitkg_graph_node_count(graph) as u64);
            assert_eq!(stats.wcc_count, 3 * 2 * 4);
            assert_eq!(stats.scc_count, stats.node_count);
            assert_eq!(stats.reciprocity, 0.0);

            let mut split: *mut SitkgSplit = ptr::null_mut();
            assert!(matches!(
                sitkg_split_by_take(graph, 2, &mut split),
                SitkgStatus::Ok
            ));
            assert_eq!(sitkg_split_test_component_count(split), 3 * 2 * 2);

            let mut metrics = std::mem::zeroed::<SitkgMetrics>();
            assert!(matches!(
                sitkg_eval_baseline(split, SitkgTask::Parent, SitkgVariant::B2, &mut metrics),
                SitkgStatus::Ok
            ));
            assert!(metrics.hits_at_1 <= metrics.hits_at_3);
            assert!(metrics.hits_at_3 <= metrics.hits_at_5);
            assert_eq!(metrics.queries, 12);

            assert!(matches!(
                sitkg_eval_random(split, SitkgTask::Next, 7, &mut metrics),
                SitkgStatus::Ok
            ));
            assert!(metrics.queries > 0);

            sitkg_split_free(split);
            sitkg_graph_free(graph);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let mut graph: *mut SitkgGraph = ptr::null_mut();
            let missing = CString::new("/nonexistent/graph.tsv").unwrap();
            let status = sitkg_graph_read(missing.as_ptr(), &mut graph);
            assert!(matches!(status, SitkgStatus::IoError));
            let message = CStr::from_ptr(sitkg_last_error()).to_string_lossy();
            assert!(message.contains("graph.nodes.tsv") || message.contains("graph.tsv"));

            assert!(matches!(
                sitkg_graph_read(ptr::null(), &mut graph),
                SitkgStatus::NullArgument
            ));
            let mut bad: *mut SitkgGraph = ptr::null_mut();
            assert!(matches!(
                sitkg_graph_synthetic(0, 0, 0, 1, false, 0.5, &mut bad),
                SitkgStatus::InvalidArgument
            ));
        }
    }
}
