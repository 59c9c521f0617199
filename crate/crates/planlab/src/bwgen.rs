//! Random block-world task generation with certified optimal lengths.
//!
//! A dataset spec names a block-count window, an optimal-plan-length window,
//! a task count, and a seed. Candidates are sampled from per-candidate RNG
//! streams split off the master seed, solved optimally, and accepted when
//! their certified length lands in the window. Acceptance always follows
//! candidate-index order, so the same spec yields the same dataset whether
//! candidates are evaluated sequentially or in parallel.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::planner::{optimal_plan, strategy_plan, PlanMode, PlanSearchLimits};
use crate::strips::{
    parse_task, render_task, Atom, Block, ParseError, State, Task, TaskMeta,
};

/// Inclusive integer window, written `"5-6"` or `"16"` in specs and flags.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct InclusiveRange {
    pub lo: u32,
    pub hi: u32,
}

impl InclusiveRange {
    pub fn new(lo: u32, hi: u32) -> InclusiveRange {
        assert!(lo <= hi, "inverted range");
        InclusiveRange { lo, hi }
    }

    pub fn contains(&self, v: u32) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(self.lo..=self.hi)
    }
}

impl fmt::Display for InclusiveRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

impl FromStr for InclusiveRange {
    type Err = String;

    fn from_str(s: &str) -> Result<InclusiveRange, String> {
        let parse = |p: &str| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad range component {p:?}"))
        };
        let (lo, hi) = match s.split_once('-') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if lo > hi {
            return Err(format!("inverted range {s:?}"));
        }
        Ok(InclusiveRange { lo, hi })
    }
}

impl TryFrom<String> for InclusiveRange {
    type Error = String;

    fn try_from(s: String) -> Result<InclusiveRange, String> {
        s.parse()
    }
}

impl From<InclusiveRange> for String {
    fn from(r: InclusiveRange) -> String {
        r.to_string()
    }
}

/// What to generate: window constraints, how many tasks, and search budgets.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BwDatasetSpec {
    pub n_blocks: InclusiveRange,
    pub optimal_len: InclusiveRange,
    pub count: usize,
    pub seed: u64,
    /// Candidate indices scanned before giving up.
    #[serde(default = "default_max_candidates")]
    pub max_candidates: u64,
    /// Node-expansion budget per candidate.
    #[serde(default = "default_max_expansions")]
    pub max_expansions: u64,
    /// Wall-clock budget per candidate, seconds.
    #[serde(default = "default_max_seconds")]
    pub max_seconds_per_candidate: f64,
    /// Admit tasks whose optimum was bounded but not certified. The recorded
    /// length is then the best upper bound, and both bounds must land in the
    /// window. Off by default: honest manifests beat big ones.
    #[serde(default)]
    pub allow_uncertified: bool,
}

fn default_max_candidates() -> u64 {
    100_000
}

fn default_max_expansions() -> u64 {
    2_000_000
}

fn default_max_seconds() -> f64 {
    30.0
}

impl BwDatasetSpec {
    pub fn new(n_blocks: InclusiveRange, optimal_len: InclusiveRange, count: usize, seed: u64) -> BwDatasetSpec {
        BwDatasetSpec {
            n_blocks,
            optimal_len,
            count,
            seed,
            max_candidates: default_max_candidates(),
            max_expansions: default_max_expansions(),
            max_seconds_per_candidate: default_max_seconds(),
            allow_uncertified: false,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.count == 0 {
            return Err(GenError::BadSpec("count must be positive".into()));
        }
        if self.n_blocks.lo == 0 {
            return Err(GenError::BadSpec("need at least one block".into()));
        }
        if self.n_blocks.hi > 250 {
            return Err(GenError::BadSpec("more than 250 blocks".into()));
        }
        if self.max_candidates == 0 || self.max_expansions == 0 {
            return Err(GenError::BadSpec("budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Error, Debug)]
pub enum GenError {
    #[error("bad dataset spec: {0}")]
    BadSpec(String),
    #[error("window too tight: {found} of {requested} tasks after {scanned} candidates")]
    BudgetExhausted {
        found: usize,
        requested: usize,
        scanned: u64,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("task file: {0}")]
    TaskFile(#[from] ParseError),
    #[error("verification failed for {task_id}: {detail}")]
    VerifyFailed { task_id: String, detail: String },
}

/// Per-task manifest row.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    pub file: String,
    pub n_blocks: u32,
    pub optimal_len: u32,
    pub certified_optimal: bool,
    /// Which RNG stream produced the task; enough to regenerate it alone.
    pub candidate_index: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub generator_version: String,
    pub seed: u64,
    pub spec: BwDatasetSpec,
    pub tasks: Vec<TaskRecord>,
}

pub struct GeneratedDataset {
    pub manifest: DatasetManifest,
    pub tasks: Vec<Task>,
}

pub const GENERATOR_VERSION: &str = "bwgen-v1";

/// Names for `n` blocks: single letters while they last, then `b27`, `b28`, ...
pub fn block_names(n: u32) -> Vec<Block> {
    (0..n)
        .map(|i| {
            let name = if i < 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("b{}", i + 1)
            };
            Block::new(&name).expect("generated names are identifiers")
        })
        .collect()
}

/// Samples a physical state by dealing blocks in shuffled order, each onto
/// the table or onto a uniformly chosen existing stack.
pub fn random_state(names: &[Block], rng: &mut impl Rng) -> State {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.shuffle(rng);
    let mut stacks: Vec<Vec<usize>> = Vec::new();
    for b in order {
        let pick = rng.gen_range(0..=stacks.len());
        if pick == stacks.len() {
            stacks.push(vec![b]);
        } else {
            stacks[pick].push(b);
        }
    }
    let mut atoms = BTreeSet::new();
    atoms.insert(Atom::Handempty);
    for stack in &stacks {
        atoms.insert(Atom::Ontable(names[stack[0]].clone()));
        for w in stack.windows(2) {
            atoms.insert(Atom::On(names[w[1]].clone(), names[w[0]].clone()));
        }
        atoms.insert(Atom::Clear(names[stack[stack.len() - 1]].clone()));
    }
    State::new(atoms).expect("stack construction is physical")
}

struct Candidate {
    index: u64,
    n_blocks: u32,
    init: State,
    goal: BTreeSet<Atom>,
    optimal_len: u32,
    certified: bool,
}

/// Draws candidate `index` from its own RNG stream and solves it. Returns
/// the candidate only if its length evidence fits the requested window.
fn eval_candidate(spec: &BwDatasetSpec, index: u64) -> Option<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let n = spec.n_blocks.sample(&mut rng);
    let names = block_names(n);
    let init = random_state(&names, &mut rng);
    let goal_state = random_state(&names, &mut rng);
    let goal: BTreeSet<Atom> = goal_state
        .atoms()
        .iter()
        .filter(|a| matches!(a, Atom::On(..) | Atom::Ontable(_)))
        .cloned()
        .collect();
    let task = Task::bw("candidate", init.clone(), goal.clone());

    let mut limits = PlanSearchLimits::new(PlanMode::AStar);
    limits.max_expansions = spec.max_expansions;
    limits.max_seconds = Duration::from_secs_f64(spec.max_seconds_per_candidate);
    let found = optimal_plan(&task, &limits).ok()?;

    let (optimal_len, certified) = if found.certified_optimal {
        (found.upper_bound?, true)
    } else if spec.allow_uncertified {
        let upper = match found.upper_bound {
            Some(u) => u,
            None => u32::try_from(strategy_plan(&task).ok()?.len()).ok()?,
        };
        if !spec.optimal_len.contains(found.lower_bound) {
            return None;
        }
        (upper, false)
    } else {
        return None;
    };
    if !spec.optimal_len.contains(optimal_len) {
        return None;
    }
    Some(Candidate {
        index,
        n_blocks: n,
        init,
        goal,
        optimal_len,
        certified,
    })
}

/// Generates a dataset using all available parallelism.
pub fn dataset(spec: &BwDatasetSpec) -> Result<GeneratedDataset, GenError> {
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get());
    dataset_with_threads(spec, threads)
}

/// Single-threaded variant; same bytes out, useful as a benchmark baseline.
pub fn dataset_seq(spec: &BwDatasetSpec) -> Result<GeneratedDataset, GenError> {
    dataset_with_threads(spec, 1)
}

/// Scans candidate indices in fixed-size batches, keeping the first `count`
/// acceptable candidates in index order. The batch size is constant so the
/// set of evaluated candidates does not depend on the thread count.
pub fn dataset_with_threads(spec: &BwDatasetSpec, threads: usize) -> Result<GeneratedDataset, GenError> {
    spec.validate()?;
    const BATCH: u64 = 64;
    let mut picked: Vec<Candidate> = Vec::with_capacity(spec.count);
    let mut next = 0u64;
    while picked.len() < spec.count && next < spec.max_candidates {
        let hi = (next + BATCH).min(spec.max_candidates);
        let indices: Vec<u64> = (next..hi).collect();
        let evals = par::map_ordered(indices, threads, |i| eval_candidate(spec, i));
        for cand in evals.into_iter().flatten() {
            if picked.len() < spec.count {
                picked.push(cand);
            }
        }
        next = hi;
    }
    if picked.len() < spec.count {
        return Err(GenError::BudgetExhausted {
            found: picked.len(),
            requested: spec.count,
            scanned: next,
        });
    }

    let mut tasks = Vec::with_capacity(spec.count);
    let mut records = Vec::with_capacity(spec.count);
    for (i, cand) in picked.into_iter().enumerate() {
        let id = format!("bw-{i:03}");
        let mut task = Task::bw(&id, cand.init, cand.goal);
        task.meta = Some(TaskMeta {
            n_blocks: cand.n_blocks,
            optimal_len: cand.optimal_len,
        });
        records.push(TaskRecord {
            id: id.clone(),
            file: format!("tasks/{id}.task"),
            n_blocks: cand.n_blocks,
            optimal_len: cand.optimal_len,
            certified_optimal: cand.certified,
            candidate_index: cand.index,
        });
        tasks.push(task);
    }
    Ok(GeneratedDataset {
        manifest: DatasetManifest {
            kind: "bw".into(),
            generator_version: GENERATOR_VERSION.into(),
            seed: spec.seed,
            spec: *spec,
            tasks: records,
        },
        tasks,
    })
}

/// Writes `manifest.json` plus one task file per task under `dir`.
pub fn write_dataset(dir: &Path, ds: &GeneratedDataset) -> Result<(), GenError> {
    fs::create_dir_all(dir.join("tasks"))?;
    for (task, record) in ds.tasks.iter().zip(&ds.manifest.tasks) {
        fs::write(dir.join(&record.file), render_task(task))?;
    }
    let mut json = serde_json::to_string_pretty(&ds.manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

/// Reads a dataset directory back into memory.
pub fn load_dataset(dir: &Path) -> Result<GeneratedDataset, GenError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for record in &manifest.tasks {
        let text = fs::read_to_string(dir.join(&record.file))?;
        let (init, goal) = parse_task(&text)?;
        let init = State::new(init).map_err(|e| GenError::VerifyFailed {
            task_id: record.id.clone(),
            detail: format!("unphysical initial state: {e}"),
        })?;
        let mut task = Task::bw(&record.id, init, goal);
        task.meta = Some(TaskMeta {
            n_blocks: record.n_blocks,
            optimal_len: record.optimal_len,
        });
        tasks.push(task);
    }
    Ok(GeneratedDataset { manifest, tasks })
}

/// Re-solves every task in a loaded dataset and checks the manifest claims:
/// certified lengths must reproduce exactly; uncertified lengths must stay
/// consistent with a fresh lower bound.
pub fn verify_dataset(ds: &GeneratedDataset, limits: &PlanSearchLimits) -> Result<(), GenError> {
    for (task, record) in ds.tasks.iter().zip(&ds.manifest.tasks) {
        let found = optimal_plan(task, limits).map_err(|e| GenError::VerifyFailed {
            task_id: record.id.clone(),
            detail: e.to_string(),
        })?;
        let fail = |detail: String| GenError::VerifyFailed {
            task_id: record.id.clone(),
            detail,
        };
        if record.certified_optimal {
            if !found.certified_optimal {
                return Err(fail("manifest claims a certified optimum; search could not reproduce it".into()));
            }
            if found.upper_bound != Some(record.optimal_len) {
                return Err(fail(format!(
                    "certified length {:?} does not match recorded {}",
                    found.upper_bound, record.optimal_len
                )));
            }
        } else if found.lower_bound > record.optimal_len {
            return Err(fail(format!(
                "recorded upper bound {} is below the lower bound {}",
                record.optimal_len, found.lower_bound
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn tiny_spec() -> BwDatasetSpec {
        let mut spec = BwDatasetSpec::new(
            InclusiveRange::new(3, 4),
            InclusiveRange::new(2, 8),
            6,
            11,
        );
        spec.max_expansions = 200_000;
        spec
    }

    #[test]
    fn range_round_trips_through_text() {
        for s in ["5-6", "16", "0-3"] {
            let r: InclusiveRange = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("6-5".parse::<InclusiveRange>().is_err());
        assert!("x".parse::<InclusiveRange>().is_err());
    }

    #[test]
    fn zero_count_is_rejected() {
        let spec = BwDatasetSpec::new(InclusiveRange::new(3, 3), InclusiveRange::new(0, 8), 0, 1);
        assert!(matches!(dataset(&spec), Err(GenError::BadSpec(_))));
    }

    #[test]
    fn three_blocks_reach_all_thirteen_configurations() {
        // 3 blocks have 13 physical table configurations; the sampler should
        // hit every one of them given enough draws.
        let names = block_names(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = BTreeSet::new();
        for _ in 0..2000 {
            seen.insert(random_state(&names, &mut rng).atoms().clone());
        }
        assert_eq!(seen.len(), 13);
    }

    #[test]
    fn same_seed_same_bytes_any_thread_count() {
        let spec = tiny_spec();
        let a = dataset_seq(&spec).unwrap();
        let b = dataset_with_threads(&spec, 4).unwrap();
        assert_eq!(
            serde_json::to_string(&a.manifest).unwrap(),
            serde_json::to_string(&b.manifest).unwrap()
        );
        for (x, y) in a.tasks.iter().zip(&b.tasks) {
            assert_eq!(render_task(x), render_task(y));
        }
    }

    #[test]
    fn generated_lengths_sit_in_window_and_certify() {
        let spec = tiny_spec();
        let ds = dataset(&spec).unwrap();
        assert_eq!(ds.tasks.len(), spec.count);
        for record in &ds.manifest.tasks {
            assert!(spec.optimal_len.contains(record.optimal_len), "{record:?}");
            assert!(record.certified_optimal);
        }
        let limits = PlanSearchLimits::new(PlanMode::AStar);
        verify_dataset(&ds, &limits).unwrap();
    }

    #[test]
    fn round_trips_through_disk() {
        let spec = tiny_spec();
        let ds = dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(
            serde_json::to_string(&ds.manifest).unwrap(),
            serde_json::to_string(&back.manifest).unwrap()
        );
        for (x, y) in ds.tasks.iter().zip(&back.tasks) {
            assert_eq!(render_task(x), render_task(y));
            assert_eq!(x.id, y.id);
        }
    }

    #[test]
    fn goals_are_positions_only() {
        let ds = dataset(&tiny_spec()).unwrap();
        for task in &ds.tasks {
            assert!(!task.goal.is_empty());
            for atom in &task.goal {
                assert!(matches!(atom, Atom::On(..) | Atom::Ontable(_)), "{atom}");
            }
        }
    }

    #[test]
    fn impossible_window_exhausts_budget() {
        let mut spec = tiny_spec();
        spec.optimal_len = InclusiveRange::new(100, 100);
        spec.max_candidates = 128;
        assert!(matches!(
            dataset(&spec),
            Err(GenError::BudgetExhausted { found: 0, .. })
        ));
    }
}
