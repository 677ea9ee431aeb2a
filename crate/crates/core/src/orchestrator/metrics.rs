//! Newline-delimited metrics records with named fields, collected in memory
//! and optionally streamed to a writer as they are produced.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Periodic evaluation snapshot. `episode_length_mean` is the student's
/// (the deployed policy); for fixed-horizon tasks both agents' lengths agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub teacher_return_mean: f64,
    pub teacher_return_std: f64,
    pub student_return_mean: f64,
    pub student_return_std: f64,
    pub episode_length_mean: f64,
    pub alpha_current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub step: u64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub student_bc: f64,
    pub student_asym: f64,
    pub student_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrlUpdateRecord {
    pub step: u64,
    pub teacher_reward_objective: f64,
    pub student_reward_objective: f64,
    pub irl_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Eval(EvalRecord),
    Update(UpdateRecord),
    IrlUpdate(IrlUpdateRecord),
}

/// Final run summary: the best and last evaluation returns per agent plus
/// environment-interaction accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub best_teacher_return: f64,
    pub best_student_return: f64,
    pub final_teacher_return: f64,
    pub final_student_return: f64,
    pub teacher_env_steps: u64,
    pub student_env_steps: u64,
    pub updates: u64,
}

/// In-memory record log with an optional line-by-line sink.
#[derive(Default)]
pub struct MetricsLog {
    records: Vec<Record>,
    sink: Option<Box<dyn Write + Send>>,
}

impl MetricsLog {
    pub fn in_memory() -> Self {
        MetricsLog::default()
    }

    pub fn with_sink(sink: Box<dyn Write + Send>) -> Self {
        MetricsLog {
            records: Vec::new(),
            sink: Some(sink),
        }
    }

    pub fn push(&mut self, record: Record) {
        if let Some(sink) = self.sink.as_mut() {
            // A record is one JSON object per line.
            let line = serde_json::to_string(&record).expect("record serialization");
            let _ = writeln!(sink, "{line}");
        }
        self.records.push(record);
    }

    pub fn flush(&mut self) {
        if let Some(sink) = self.sink.as_mut() {
            let _ = sink.flush();
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn eval_records(&self) -> impl Iterator<Item = &EvalRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Eval(e) => Some(e),
            _ => None,
        })
    }

    pub fn last_eval(&self) -> Option<&EvalRecord> {
        self.eval_records().last()
    }

    /// Serializes every record as newline-delimited JSON.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialization"));
            out.push('\n');
        }
        out
    }
}

/// Parses a metrics file written by [`MetricsLog::to_jsonl`] (or streamed).
pub fn parse_jsonl(text: &str) -> Result<Vec<Record>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
