//! Run configuration: flat `key = value` lines grouped in `[teacher]`,
//! `[student]`, `[distill]` and `[finetune]` sections. Lines before the first
//! section are global. `#` starts a comment. Every key is checked against
//! [`KEYS`]; anything else is an error.
//!
//! ```text
//! seed = 42
//! data = train.csv
//! embedding_dim = 16
//!
//! [teacher]
//! model = crossnet
//! depth = 3
//!
//! [student]
//! function = outer
//!
//! [distill]
//! alpha = 1
//! beta = 10
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{parse_ratios, DEFAULT_RATIOS};
use crate::distill::{DistillPlan, KdSpace, StageConfig};
use crate::error::{config_err, Error, Result};
use crate::interactions::{DagfmPlusSpec, DagfmSpec, InteractionFn, MlpInput};
use crate::model::ModelSpec;
use crate::teachers::{
    CinSpec, CrossNetSpec, PairwiseKind, PairwiseSpec, TinyMlpSpec, DEFAULT_CIN_LAYER_SIZE, DEFAULT_DEPTH,
};

pub const DEFAULT_EMBEDDING_DIM: usize = 16;
pub const DEFAULT_SEED: u64 = 42;

/// Published keys per section (`""` is the global section).
pub const KEYS: &[(&str, &[&str])] = &[
    (
        "",
        &[
            "seed",
            "data",
            "schema",
            "min_freq",
            "split",
            "embedding_dim",
            "threads",
            "out",
        ],
    ),
    (
        "teacher",
        &[
            "model",
            "depth",
            "cin_layer_size",
            "epochs",
            "lr",
            "batch_size",
            "patience",
            "l2",
        ],
    ),
    ("student", &["model", "function", "layers", "mlp_hidden", "mlp_input"]),
    (
        "distill",
        &[
            "alpha",
            "beta",
            "kd_space",
            "epochs",
            "lr",
            "batch_size",
            "patience",
            "l2",
        ],
    ),
    ("finetune", &["epochs", "lr", "batch_size", "patience", "l2"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeacherKind {
    Cin,
    Crossnet,
}

impl FromStr for TeacherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cin" => Ok(TeacherKind::Cin),
            "crossnet" => Ok(TeacherKind::Crossnet),
            _ => Err(config_err(format!("unknown teacher `{s}` (cin | crossnet)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudentKind {
    Dagfm,
    Fwfm,
    Fmfm,
    TinyMlp,
}

impl FromStr for StudentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dagfm" => Ok(StudentKind::Dagfm),
            "fwfm" => Ok(StudentKind::Fwfm),
            "fmfm" => Ok(StudentKind::Fmfm),
            "tiny-mlp" => Ok(StudentKind::TinyMlp),
            _ => Err(config_err(format!(
                "unknown student `{s}` (dagfm | fwfm | fmfm | tiny-mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub model: TeacherKind,
    pub depth: usize,
    pub cin_layer_size: usize,
    pub stage: StageConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentConfig {
    pub model: StudentKind,
    pub function: InteractionFn,
    /// Propagation layers; the teacher depth when unset.
    pub layers: Option<usize>,
    /// Hidden widths of the MLP tower; empty means plain DAGFM.
    pub mlp_hidden: Vec<usize>,
    pub mlp_input: MlpInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub min_freq: u64,
    pub split: [f64; 3],
    pub embedding_dim: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub teacher: TeacherConfig,
    pub student: StudentConfig,
    pub plan: DistillPlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            data: None,
            schema: None,
            min_freq: 1,
            split: DEFAULT_RATIOS,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            threads: 1,
            out: None,
            teacher: TeacherConfig {
                model: TeacherKind::Crossnet,
                depth: DEFAULT_DEPTH,
                cin_layer_size: DEFAULT_CIN_LAYER_SIZE,
                stage: StageConfig::default(),
            },
            student: StudentConfig {
                model: StudentKind::Dagfm,
                function: InteractionFn::Outer,
                layers: None,
                mlp_hidden: Vec::new(),
                mlp_input: MlpInput::AllLayers,
            },
            plan: DistillPlan::default(),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid value `{value}` for `{key}`"),
    })
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(line, key, v.trim())).collect()
}

fn set_stage(stage: &mut StageConfig, line: usize, key: &str, value: &str) -> Result<()> {
    match key {
        "epochs" => stage.epochs = parse_value(line, key, value)?,
        "lr" => stage.lr = parse_value(line, key, value)?,
        "batch_size" => stage.batch_size = parse_value(line, key, value)?,
        "patience" => stage.patience = parse_value(line, key, value)?,
        "l2" => stage.l2 = parse_value(line, key, value)?,
        _ => unreachable!("key list checked"),
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_in(text, None)
    }

    /// Load a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_in(&text, path.parent())
    }

    fn parse_in(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let resolve = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("malformed section header `{content}`"),
                })?;
                if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                    return Err(config_err(format!("line {line}: unknown section `[{name}]`")));
                }
                section = name.to_owned();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let allowed = KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&key) {
                let where_ = if section.is_empty() {
                    "global section".to_owned()
                } else {
                    format!("[{section}]")
                };
                return Err(config_err(format!(
                    "line {line}: unknown key `{key}` in {where_}; allowed: {}",
                    allowed.join(", ")
                )));
            }
            match (section.as_str(), key) {
                ("", "seed") => cfg.seed = parse_value(line, key, value)?,
                ("", "data") => cfg.data = Some(resolve(value)),
                ("", "schema") => cfg.schema = Some(resolve(value)),
                ("", "min_freq") => cfg.min_freq = parse_value(line, key, value)?,
                ("", "split") => {
                    cfg.split = parse_ratios(value).map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })?
                }
                ("", "embedding_dim") => cfg.embedding_dim = parse_value(line, key, value)?,
                ("", "threads") => cfg.threads = parse_value(line, key, value)?,
                ("", "out") => cfg.out = Some(resolve(value)),
                ("teacher", "model") => cfg.teacher.model = value.parse()?,
                ("teacher", "depth") => cfg.teacher.depth = parse_value(line, key, value)?,
                ("teacher", "cin_layer_size") => cfg.teacher.cin_layer_size = parse_value(line, key, value)?,
                ("teacher", _) => set_stage(&mut cfg.teacher.stage, line, key, value)?,
                ("student", "model") => cfg.student.model = value.parse()?,
                ("student", "function") => cfg.student.function = value.parse()?,
                ("student", "layers") => cfg.student.layers = Some(parse_value(line, key, value)?),
                ("student", "mlp_hidden") => cfg.student.mlp_hidden = parse_list(line, key, value)?,
                ("student", "mlp_input") => cfg.student.mlp_input = value.parse()?,
                ("distill", "alpha") => cfg.plan.alpha = parse_value(line, key, value)?,
                ("distill", "beta") => cfg.plan.beta = parse_value(line, key, value)?,
                ("distill", "kd_space") => cfg.plan.kd_space = value.parse::<KdSpace>()?,
                ("distill", _) => set_stage(&mut cfg.plan.distill, line, key, value)?,
                ("finetune", _) => set_stage(&mut cfg.plan.finetune, line, key, value)?,
                _ => unreachable!("key list checked"),
            }
        }
        cfg.apply_stage_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Derive per-stage shuffle seeds from the run seed.
    pub fn apply_stage_seeds(&mut self) {
        self.teacher.stage.seed = self.seed;
        self.plan.distill.seed = self.seed.wrapping_add(1);
        self.plan.finetune.seed = self.seed.wrapping_add(2);
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(config_err("embedding_dim must be at least 1"));
        }
        if self.teacher.depth == 0 {
            return Err(config_err("teacher depth must be at least 1"));
        }
        self.teacher.stage.validate()?;
        self.plan.validate()
    }

    pub fn student_layers(&self) -> usize {
        self.student.layers.unwrap_or(self.teacher.depth)
    }

    pub fn teacher_spec(&self, fields: usize) -> ModelSpec {
        let (m, d, depth) = (fields, self.embedding_dim, self.teacher.depth);
        match self.teacher.model {
            TeacherKind::Cin => ModelSpec::Cin(CinSpec::uniform(m, d, depth, self.teacher.cin_layer_size)),
            TeacherKind::Crossnet => ModelSpec::CrossNet(CrossNetSpec {
                fields: m,
                dim: d,
                depth,
            }),
        }
    }

    pub fn student_spec(&self, fields: usize) -> ModelSpec {
        let (m, d) = (fields, self.embedding_dim);
        match self.student.model {
            StudentKind::Dagfm => {
                let dag = DagfmSpec::new(m, d, self.student_layers(), self.student.function);
                if self.student.mlp_hidden.is_empty() {
                    ModelSpec::Dagfm(dag)
                } else {
                    ModelSpec::DagfmPlus(DagfmPlusSpec {
                        dag,
                        hidden: self.student.mlp_hidden.clone(),
                        mlp_input: self.student.mlp_input,
                    })
                }
            }
            StudentKind::Fwfm => ModelSpec::Pairwise(PairwiseSpec {
                fields: m,
                dim: d,
                kind: PairwiseKind::Fwfm,
            }),
            StudentKind::Fmfm => ModelSpec::Pairwise(PairwiseSpec {
                fields: m,
                dim: d,
                kind: PairwiseKind::Fmfm,
            }),
            StudentKind::TinyMlp => ModelSpec::TinyMlp(TinyMlpSpec::new(m, d)),
        }
    }

    /// Seed for initializing the teacher's parameters.
    pub fn teacher_init_seed(&self) -> u64 {
        self.seed.wrapping_add(100)
    }

    /// Seed for initializing the student's parameters.
    pub fn student_init_seed(&self) -> u64 {
        self.seed.wrapping_add(200)
    }
}
