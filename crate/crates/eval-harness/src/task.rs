//! Task definitions and their line-delimited file format.
//!
//! A task file starts with a header record
//! `{"task": "...", "kind": "multiple_choice" | "exact_match", "version": 0}`
//! followed by one record per item:
//! `{"context": "...", "choices": [...], "gold": n}` or
//! `{"context": "...", "answer": "..."}`, each optionally flagged
//! `"fewshot": true` to join the exemplar pool instead of the scored set.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    MultipleChoice,
    ExactMatch,
}

/// One evaluation item.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalItem {
    Choice {
        context: String,
        choices: Vec<String>,
        gold: usize,
    },
    Match {
        context: String,
        answer: String,
    },
}

impl EvalItem {
    pub fn context(&self) -> &str {
        match self {
            EvalItem::Choice { context, .. } | EvalItem::Match { context, .. } => context,
        }
    }

    /// The gold continuation text used when this item renders as an
    /// exemplar.
    pub fn gold_text(&self) -> &str {
        match self {
            EvalItem::Choice { choices, gold, .. } => &choices[*gold],
            EvalItem::Match { answer, .. } => answer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub name: String,
    pub kind: TaskKind,
    pub version: u32,
    pub items: Vec<EvalItem>,
    pub fewshot_pool: Vec<EvalItem>,
}

impl EvalTask {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.items.is_empty() {
            return Err(EvalError::EmptyTask);
        }
        for (i, item) in self.items.iter().chain(&self.fewshot_pool).enumerate() {
            match (self.kind, item) {
                (TaskKind::MultipleChoice, EvalItem::Choice { choices, gold, .. }) => {
                    if *gold >= choices.len() {
                        return Err(EvalError::BadTaskFile {
                            line: i + 2,
                            reason: format!("gold index {gold} beyond {} choices", choices.len()),
                        });
                    }
                }
                (TaskKind::ExactMatch, EvalItem::Match { .. }) => {}
                _ => {
                    return Err(EvalError::BadTaskFile {
                        line: i + 2,
                        reason: "item shape does not match the task kind".into(),
                    });
                }
            }
        }
        for pool_item in &self.fewshot_pool {
            if self
                .items
                .iter()
                .any(|i| i.context() == pool_item.context())
            {
                return Err(EvalError::BadTaskFile {
                    line: 0,
                    reason: format!(
                        "fewshot pool overlaps scored items at context {:?}",
                        pool_item.context()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    task: String,
    kind: String,
    #[serde(default)]
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct ItemRecord {
    context: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fewshot: bool,
}

pub fn load_task<R: BufRead>(reader: R) -> Result<EvalTask, EvalError> {
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(EvalError::BadTaskFile {
        line: 1,
        reason: "empty file".into(),
    })??;
    let header: HeaderRecord =
        serde_json::from_str(&header_line).map_err(|e| EvalError::BadTaskFile {
            line: 1,
            reason: e.to_string(),
        })?;
    let kind = match header.kind.as_str() {
        "multiple_choice" => TaskKind::MultipleChoice,
        "exact_match" => TaskKind::ExactMatch,
        other => {
            return Err(EvalError::BadTaskFile {
                line: 1,
                reason: format!("unknown task kind `{other}`"),
            })
        }
    };
    let mut items = Vec::new();
    let mut pool = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ItemRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::BadTaskFile {
                line: lineno,
                reason: e.to_string(),
            })?;
        let item = match kind {
            TaskKind::MultipleChoice => {
                let gold = record.gold.ok_or(EvalError::BadTaskFile {
                    line: lineno,
                    reason: "multiple_choice record needs `gold`".into(),
                })?;
                if record.choices.is_empty() {
                    return Err(EvalError::BadTaskFile {
                        line: lineno,
                        reason: "multiple_choice record needs `choices`".into(),
                    });
                }
                EvalItem::Choice {
                    context: record.context,
                    choices: record.choices,
                    gold,
                }
            }
            TaskKind::ExactMatch => EvalItem::Match {
                context: record.context,
                answer: record.answer.ok_or(EvalError::BadTaskFile {
                    line: lineno,
                    reason: "exact_match record needs `answer`".into(),
                })?,
            },
        };
        if record.fewshot {
            pool.push(item);
        } else {
            items.push(item);
        }
    }
    let task = EvalTask {
        name: header.task,
        kind,
        version: header.version,
        items,
        fewshot_pool: pool,
    };
    task.validate()?;
    Ok(task)
}

pub fn save_task<W: Write>(task: &EvalTask, w: &mut W) -> Result<(), EvalError> {
    let header = HeaderRecord {
        task: task.name.clone(),
        kind: match task.kind {
            TaskKind::MultipleChoice => "multiple_choice".into(),
            TaskKind::ExactMatch => "exact_match".into(),
        },
        version: task.version,
    };
    writeln!(
        w,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )?;
    let write_item = |w: &mut W, item: &EvalItem, fewshot: bool| -> Result<(), EvalError> {
        let record = match item {
            EvalItem::Choice {
                context,
                choices,
                gold,
            } => ItemRecord {
                context: context.clone(),
                choices: choices.clone(),
                gold: Some(*gold),
                answer: None,
                fewshot,
            },
            EvalItem::Match { context, answer } => ItemRecord {
                context: context.clone(),
                choices: Vec::new(),
                gold: None,
                answer: Some(answer.clone()),
                fewshot,
            },
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&record).expect("item serializes")
        )?;
        Ok(())
    };
    for item in &task.items {
        write_item(w, item, false)?;
    }
    for item in &task.fewshot_pool {
        write_item(w, item, true)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_task() -> EvalTask {
        EvalTask {
            name: "demo".into(),
            kind: TaskKind::MultipleChoice,
            version: 0,
            items: vec![
                EvalItem::Choice {
                    context: "Q: sky color?".into(),
                    choices: vec!["blue".into(), "green".into()],
                    gold: 0,
                },
                EvalItem::Choice {
                    context: "Q: grass color?".into(),
                    choices: vec!["blue".into(), "green".into()],
                    gold: 1,
                },
            ],
            fewshot_pool: vec![EvalItem::Choice {
                context: "Q: snow color?".into(),
                choices: vec!["white".into(), "black".into()],
                gold: 0,
            }],
        }
    }

    #[test]
    fn task_file_round_trip() {
        let task = demo_task();
        let mut buf = Vec::new();
        save_task(&task, &mut buf).unwrap();
        let loaded = load_task(buf.as_slice()).unwrap();
        assert_eq!(task, loaded);
    }

    #[test]
    fn gold_out_of_range_is_rejected() {
        let mut task = demo_task();
        if let EvalItem::Choice { gold, .. } = &mut task.items[0] {
            *gold = 5;
        }
        assert!(task.validate().is_err());
    }

    #[test]
    fn pool_overlap_is_rejected() {
        let mut task = demo_task();
        task.fewshot_pool.push(task.items[0].clone());
        assert!(task.validate().is_err());
    }

    #[test]
    fn bad_line_reports_position() {
        let text = "{\"task\":\"t\",\"kind\":\"multiple_choice\"}\nnot json\n";
        match load_task(text.as_bytes()) {
            Err(EvalError::BadTaskFile { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected BadTaskFile, got {other:?}"),
        }
    }
}
