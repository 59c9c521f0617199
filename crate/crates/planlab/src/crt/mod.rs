//! Exponential-growth word puzzles with algebraic placeholders.
//!
//! A scenario is a question template about some process that doubles,
//! triples, or quadruples every `aX` time units until complete at `bY`
//! units. Asking when the process was at `1/r^k` of completion makes the
//! intended answer the linear form `bY - k*aX`, which a deterministic judge
//! can check without touching a model.

mod linear;

pub use linear::parse_linear_answer;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CrtError {
    #[error("unsupported growth rate {0}: expected 2, 3, or 4")]
    BadRate(u32),
    #[error("scenario {id}: {detail}")]
    BadScenario { id: String, detail: String },
    #[error("params (a={a}, b={b}, k={k}) out of range: {detail}")]
    BadParams { a: u32, b: u32, k: u32, detail: String },
    #[error("{denom} is not a power of {rate}")]
    NotAPower { denom: u64, rate: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario file: {0}")]
    ScenarioFile(#[from] toml::de::Error),
    #[error("task file: {0}")]
    TaskFile(#[from] serde_json::Error),
    #[error("bad dataset spec: {0}")]
    BadSpec(String),
}

/// A question template plus the growth rate its wording implies.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrtScenario {
    pub id: String,
    pub rate: u32,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub subject: String,
    pub template: String,
}

/// The numeric knobs of one task instance: the process grows every `aX`
/// units, completes at `bY` units, and the question asks about `1/r^k`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrtParams {
    pub a: u32,
    pub b: u32,
    pub k: u32,
}

/// Canonical `AY - BX` answer shape. Both coefficients are present (a
/// parsed, well-formed answer) or both absent (anything else).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LinearForm {
    pub a_y: Option<i64>,
    pub b_x: Option<i64>,
}

impl LinearForm {
    pub fn present(a_y: i64, b_x: i64) -> LinearForm {
        LinearForm {
            a_y: Some(a_y),
            b_x: Some(b_x),
        }
    }

    pub fn absent() -> LinearForm {
        LinearForm {
            a_y: None,
            b_x: None,
        }
    }

    pub fn is_present(&self) -> bool {
        self.a_y.is_some()
    }
}

impl std::fmt::Display for LinearForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.a_y, self.b_x) {
            (Some(a), Some(b)) => write!(f, "{a}Y - {b}X"),
            _ => write!(f, "(no answer)"),
        }
    }
}

/// A rendered question with its ground truth attached.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrtTask {
    pub id: String,
    pub scenario_id: String,
    pub rate: u32,
    pub params: CrtParams,
    pub question: String,
    pub truth: LinearForm,
}

pub fn rate_word(rate: u32) -> Result<&'static str, CrtError> {
    match rate {
        2 => Ok("doubles"),
        3 => Ok("triples"),
        4 => Ok("quadruples"),
        other => Err(CrtError::BadRate(other)),
    }
}

/// The process is at `1/r^k` exactly `k` steps before completion, so the
/// answer is `bY - k*aX` regardless of the rate's value.
pub fn ground_truth(params: &CrtParams, rate: u32) -> Result<LinearForm, CrtError> {
    rate_word(rate)?;
    Ok(LinearForm::present(
        i64::from(params.b),
        i64::from(params.k) * i64::from(params.a),
    ))
}

/// Independent entry point used when the fraction arrives as a denominator:
/// recovers `k` by brute force over `rate^k`, then prices the usual form.
pub fn ground_truth_from_fraction(
    a: u32,
    b: u32,
    denom: u64,
    rate: u32,
) -> Result<LinearForm, CrtError> {
    rate_word(rate)?;
    let mut power = 1u64;
    let mut k = 0u32;
    while power < denom {
        power = power
            .checked_mul(u64::from(rate))
            .ok_or(CrtError::NotAPower { denom, rate })?;
        k += 1;
    }
    if power != denom {
        return Err(CrtError::NotAPower { denom, rate });
    }
    ground_truth(&CrtParams { a, b, k }, rate)
}

fn validate_params(params: &CrtParams, rate: u32) -> Result<u64, CrtError> {
    let bad = |detail: &str| CrtError::BadParams {
        a: params.a,
        b: params.b,
        k: params.k,
        detail: detail.to_string(),
    };
    if params.a == 0 || params.b == 0 {
        return Err(bad("step and total coefficients must be positive"));
    }
    u64::from(rate)
        .checked_pow(params.k)
        .ok_or_else(|| bad("rate^k overflows"))
}

/// Renders the scenario template with concrete parameters and attaches the
/// ground truth. Every placeholder must resolve.
pub fn make_crt_task(
    scenario: &CrtScenario,
    params: &CrtParams,
    id: &str,
) -> Result<CrtTask, CrtError> {
    let word = rate_word(scenario.rate)?;
    let denom = validate_params(params, scenario.rate)?;
    let question = scenario
        .template
        .replace("{RATE_WORD}", word)
        .replace("{STEP}", &format!("{}X", params.a))
        .replace("{TOTAL}", &format!("{}Y", params.b))
        .replace("{FRACTION}", &format!("1/{denom}"))
        .replace("{UNIT}", &scenario.unit)
        .replace("{SUBJECT}", &scenario.subject);
    for name in ["{RATE_WORD}", "{STEP}", "{TOTAL}", "{FRACTION}", "{UNIT}", "{SUBJECT}"] {
        if question.contains(name) {
            return Err(CrtError::BadScenario {
                id: scenario.id.clone(),
                detail: format!("placeholder {name} did not resolve"),
            });
        }
    }
    Ok(CrtTask {
        id: id.to_string(),
        scenario_id: scenario.id.clone(),
        rate: scenario.rate,
        params: *params,
        question,
        truth: ground_truth(params, scenario.rate)?,
    })
}

/// An answer is correct only when it parsed and matches the truth exactly.
pub fn check_answer(answer: &LinearForm, truth: &LinearForm) -> bool {
    answer.is_present() && answer == truth
}

const BUILTIN_SCENARIOS: &str = include_str!("../../assets/scenarios.toml");

#[derive(Deserialize)]
struct ScenarioFile {
    #[serde(rename = "scenario")]
    scenarios: Vec<CrtScenario>,
}

fn parse_scenarios(text: &str) -> Result<Vec<CrtScenario>, CrtError> {
    let file: ScenarioFile = toml::from_str(text)?;
    for s in &file.scenarios {
        rate_word(s.rate).map_err(|_| CrtError::BadScenario {
            id: s.id.clone(),
            detail: format!("unsupported rate {}", s.rate),
        })?;
        for required in ["{STEP}", "{TOTAL}", "{FRACTION}"] {
            if !s.template.contains(required) {
                return Err(CrtError::BadScenario {
                    id: s.id.clone(),
                    detail: format!("template lacks {required}"),
                });
            }
        }
    }
    Ok(file.scenarios)
}

/// The scenarios shipped with the crate.
pub fn builtin_scenarios() -> &'static [CrtScenario] {
    static SCENARIOS: OnceLock<Vec<CrtScenario>> = OnceLock::new();
    SCENARIOS.get_or_init(|| parse_scenarios(BUILTIN_SCENARIOS).expect("embedded scenarios parse"))
}

pub fn load_scenarios(path: &Path) -> Result<Vec<CrtScenario>, CrtError> {
    parse_scenarios(&fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CrtDatasetSpec {
    #[serde(default = "default_per_scenario")]
    pub per_scenario: u32,
    pub seed: u64,
}

fn default_per_scenario() -> u32 {
    3
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CrtTaskRecord {
    pub id: String,
    pub file: String,
    pub scenario_id: String,
    pub rate: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrtManifest {
    pub kind: String,
    pub generator_version: String,
    pub seed: u64,
    pub spec: CrtDatasetSpec,
    pub tasks: Vec<CrtTaskRecord>,
}

pub struct CrtDataset {
    pub manifest: CrtManifest,
    pub tasks: Vec<CrtTask>,
}

pub const CRT_GENERATOR_VERSION: &str = "crtgen-v1";

/// Samples `per_scenario` distinct parameter triples for every scenario.
/// Draws come from a single seeded stream in scenario order, so the dataset
/// is a pure function of (scenarios, spec).
pub fn crt_dataset(scenarios: &[CrtScenario], spec: &CrtDatasetSpec) -> Result<CrtDataset, CrtError> {
    if scenarios.is_empty() {
        return Err(CrtError::BadSpec("no scenarios".into()));
    }
    if spec.per_scenario == 0 {
        return Err(CrtError::BadSpec("per_scenario must be positive".into()));
    }
    if spec.per_scenario > 150 {
        return Err(CrtError::BadSpec("per_scenario beyond distinct parameter space".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tasks = Vec::new();
    let mut records = Vec::new();
    for scenario in scenarios {
        let mut used: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
        for j in 0..spec.per_scenario {
            let params = loop {
                let p = CrtParams {
                    a: rng.gen_range(2..=9),
                    b: rng.gen_range(2..=9),
                    k: rng.gen_range(1..=3),
                };
                if used.insert((p.a, p.b, p.k)) {
                    break p;
                }
            };
            let id = format!("crt-{}-{j}", scenario.id);
            let task = make_crt_task(scenario, &params, &id)?;
            records.push(CrtTaskRecord {
                id: id.clone(),
                file: format!("tasks/{id}.json"),
                scenario_id: scenario.id.clone(),
                rate: scenario.rate,
            });
            tasks.push(task);
        }
    }
    Ok(CrtDataset {
        manifest: CrtManifest {
            kind: "crt".into(),
            generator_version: CRT_GENERATOR_VERSION.into(),
            seed: spec.seed,
            spec: *spec,
            tasks: records,
        },
        tasks,
    })
}

pub fn write_crt_dataset(dir: &Path, ds: &CrtDataset) -> Result<(), CrtError> {
    fs::create_dir_all(dir.join("tasks"))?;
    for (task, record) in ds.tasks.iter().zip(&ds.manifest.tasks) {
        let mut json = serde_json::to_string_pretty(task)?;
        json.push('\n');
        fs::write(dir.join(&record.file), json)?;
    }
    let mut json = serde_json::to_string_pretty(&ds.manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_crt_dataset(dir: &Path) -> Result<CrtDataset, CrtError> {
    let manifest: CrtManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for record in &manifest.tasks {
        let task: CrtTask = serde_json::from_str(&fs::read_to_string(dir.join(&record.file))?)?;
        tasks.push(task);
    }
    Ok(CrtDataset { manifest, tasks })
}
