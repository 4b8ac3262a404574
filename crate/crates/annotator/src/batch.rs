//! Batch rationale augmentation over a bounded worker pool.
//!
//! The batch runner never drops data: every input instance comes back in
//! input order, augmented when its annotation call succeeded and unchanged
//! otherwise, with a failure record per miss. Raw endpoint replies are
//! persisted as line-delimited records so a batch can be re-parsed offline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mosaic_core::datagen::{InstructionInstance, Role};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{
    AnnotationClient, AnnotationJob, AnnotationResult, AnnotationStatus, AnnotatorError,
    TemplateStore,
};

/// Template used for rationale augmentation.
pub const RATIONALE_TEMPLATE: &str = "rationale";

/// What happened to one instance during augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentStatus {
    /// Rationale attached.
    Augmented,
    /// Precondition not met (already has a rationale, or no QA pair);
    /// instance passed through untouched.
    Skipped,
    /// Endpoint call failed; instance passed through untouched.
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: usize,
    pub status: AnnotationStatus,
    pub attempts_used: u32,
    pub reason: String,
}

/// One line of the raw-response log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawLogRecord {
    pub index: usize,
    pub status: AnnotationStatus,
    pub attempts_used: u32,
    pub raw_response: String,
}

#[derive(Debug)]
pub struct AugmentOutcome {
    pub instance: InstructionInstance,
    pub status: AugmentStatus,
    pub note: Option<String>,
}

type AugmentResult = Result<(AugmentOutcome, Option<AnnotationResult>), AnnotatorError>;

#[derive(Debug, Default)]
pub struct BatchReport {
    pub instances: Vec<InstructionInstance>,
    pub statuses: Vec<AugmentStatus>,
    pub failures: Vec<FailureRecord>,
}

impl BatchReport {
    pub fn augmented_count(&self) -> usize {
        self.statuses
            .iter()
            .filter(|s| **s == AugmentStatus::Augmented)
            .count()
    }
}

/// Attach a generated rationale to one instance.
///
/// Precondition misses (existing rationale, no QA pair) skip the call; call
/// failures return the instance unchanged with a note. Data is never dropped.
pub fn augment_rationale(
    instance: InstructionInstance,
    client: &AnnotationClient,
    templates: &TemplateStore,
) -> AugmentResult {
    if instance.rationale.is_some() {
        return Ok((
            AugmentOutcome {
                instance,
                status: AugmentStatus::Skipped,
                note: Some("instance already has a rationale".into()),
            },
            None,
        ));
    }
    let question = instance
        .turns
        .iter()
        .find(|t| t.role == Role::User)
        .map(|t| t.text.clone());
    let answer = instance
        .turns
        .iter()
        .find(|t| t.role == Role::Assistant)
        .map(|t| t.text.clone());
    let (Some(question), Some(answer)) = (question, answer) else {
        return Ok((
            AugmentOutcome {
                instance,
                status: AugmentStatus::Skipped,
                note: Some("instance has no QA pair".into()),
            },
            None,
        ));
    };

    let job = AnnotationJob::new(instance.images.clone(), RATIONALE_TEMPLATE)
        .var("question", question)
        .var("answer", answer)
        .var("num_images", instance.images.len().to_string());
    let job = AnnotationJob {
        max_attempts: client.config().max_attempts,
        ..job
    };
    let result = client.annotate(&job, templates)?;

    let outcome = match result.status {
        AnnotationStatus::Ok => match result.qa_items.iter().find_map(|i| i.rationale.clone()) {
            Some(rationale) => {
                let mut augmented = instance;
                augmented.rationale = Some(rationale);
                AugmentOutcome {
                    instance: augmented,
                    status: AugmentStatus::Augmented,
                    note: None,
                }
            }
            None => AugmentOutcome {
                instance,
                status: AugmentStatus::Failed,
                note: Some("reply parsed but carried no rationale".into()),
            },
        },
        AnnotationStatus::ParseFailed => AugmentOutcome {
            instance,
            status: AugmentStatus::Failed,
            note: Some("unparseable reply".into()),
        },
        AnnotationStatus::TransportFailed => AugmentOutcome {
            instance,
            status: AugmentStatus::Failed,
            note: Some(format!("transport failed: {}", result.raw_response)),
        },
    };
    Ok((outcome, Some(result)))
}

/// Augment a whole batch with at most `config.concurrency` in-flight calls.
///
/// Results come back in input order regardless of completion order. When
/// `raw_log` is given, every endpoint reply is appended to it as one JSON
/// line per instance.
pub fn augment_batch(
    instances: Vec<InstructionInstance>,
    client: &AnnotationClient,
    templates: &TemplateStore,
    raw_log: Option<&Path>,
) -> Result<BatchReport, AnnotatorError> {
    let total = instances.len();
    let workers = client.config().concurrency.max(1).min(total.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<AugmentResult>>> = (0..total).map(|_| Mutex::new(None)).collect();
    let inputs: Vec<Mutex<Option<InstructionInstance>>> =
        instances.into_iter().map(|i| Mutex::new(Some(i))).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= total {
                    break;
                }
                let instance = inputs[index]
                    .lock()
                    .unwrap()
                    .take()
                    .expect("input taken once");
                let outcome = augment_rationale(instance, client, templates);
                *slots[index].lock().unwrap() = Some(outcome);
            });
        }
    });

    let mut report = BatchReport::default();
    let mut log = match raw_log {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    for (index, slot) in slots.into_iter().enumerate() {
        let (outcome, result) = slot.into_inner().unwrap().expect("worker filled slot")?;
        if let (Some(log), Some(result)) = (log.as_mut(), result.as_ref()) {
            let record = RawLogRecord {
                index,
                status: result.status,
                attempts_used: result.attempts_used,
                raw_response: result.raw_response.clone(),
            };
            serde_json::to_writer(&mut *log, &record)
                .map_err(|e| AnnotatorError::Config(e.to_string()))?;
            log.write_all(b"\n")?;
        }
        if outcome.status == AugmentStatus::Failed {
            let (status, attempts) = result
                .as_ref()
                .map(|r| (r.status, r.attempts_used))
                .unwrap_or((AnnotationStatus::TransportFailed, 0));
            report.failures.push(FailureRecord {
                index,
                status,
                attempts_used: attempts,
                reason: outcome.note.clone().unwrap_or_default(),
            });
        }
        report.statuses.push(outcome.status);
        report.instances.push(outcome.instance);
    }
    if let Some(mut log) = log {
        log.flush()?;
    }
    Ok(report)
}

/// Index and re-parsed QA items for one raw-log record; `None` when the
/// stored reply does not parse.
pub type ReplayedRecord = (usize, Option<Vec<crate::QaItem>>);

/// Re-parse a persisted raw-response log without touching the endpoint.
pub fn replay_log(path: impl AsRef<Path>) -> Result<Vec<ReplayedRecord>, AnnotatorError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawLogRecord =
            serde_json::from_str(&line).map_err(|e| AnnotatorError::Config(e.to_string()))?;
        let items = serde_json::from_str::<serde_json::Value>(&record.raw_response)
            .ok()
            .and_then(|v| {
                v.pointer("/choices/0/message/content")
                    .and_then(|c| c.as_str())
                    .map(str::to_string)
            })
            .and_then(|content| crate::parse_qa_items(&content));
        out.push((record.index, items));
    }
    Ok(out)
}

/// Seeded sample of instance indices for manual review, without replacement.
pub fn sample_for_review(total: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.min(total);
    let mut picked = rand::seq::index::sample(&mut rng, total, n).into_vec();
    picked.sort_unstable();
    picked
}
