//! `mosaic annotate` — batch rationale augmentation with a no-data-loss
//! contract: every input instance is written back out, augmented or not.

use std::io::Write;
use std::path::Path;

use mosaic_annotator::batch::{augment_batch, sample_for_review, RATIONALE_TEMPLATE};
use mosaic_annotator::{AnnotationClient, EndpointConfig, TemplateStore};
use mosaic_core::datagen::{read_instances, write_instances};

use crate::error::CliError;

pub struct AnnotateParams<'a> {
    pub instances: &'a Path,
    pub template: Option<&'a Path>,
    pub endpoint: EndpointConfig,
    pub out: &'a Path,
    pub failures: Option<&'a Path>,
    pub raw_log: Option<&'a Path>,
    pub review_sample: Option<usize>,
    pub review_out: Option<&'a Path>,
}

pub fn run(params: AnnotateParams<'_>) -> Result<(), CliError> {
    // Credential check happens before any file or network work.
    let client = AnnotationClient::new(params.endpoint)?;

    let mut templates = TemplateStore::builtin();
    if let Some(path) = params.template {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        templates.insert(RATIONALE_TEMPLATE, &text);
    }

    let inputs = read_instances(params.instances)?;
    let input_count = inputs.len();
    let report = augment_batch(inputs, &client, &templates, params.raw_log)?;
    assert_eq!(report.instances.len(), input_count, "no-data-loss contract");
    write_instances(params.out, &report.instances)?;

    let failures_path = match params.failures {
        Some(p) => p.to_path_buf(),
        None => params.out.with_extension("failures.jsonl"),
    };
    let mut failures_file = std::fs::File::create(&failures_path)?;
    for failure in &report.failures {
        serde_json::to_writer(&mut failures_file, failure)?;
        failures_file.write_all(b"\n")?;
    }

    if let Some(n) = params.review_sample {
        let review_path = match params.review_out {
            Some(p) => p.to_path_buf(),
            None => params.out.with_extension("review.jsonl"),
        };
        let picked = sample_for_review(report.instances.len(), n, 0);
        let sampled: Vec<_> = picked
            .into_iter()
            .map(|i| report.instances[i].clone())
            .collect();
        write_instances(&review_path, &sampled)?;
        println!(
            "exported {} instances for manual review -> {}",
            sampled.len(),
            review_path.display()
        );
    }

    println!(
        "annotated {input_count} instances: {} augmented, {} failed (log: {}), output -> {}",
        report.augmented_count(),
        report.failures.len(),
        failures_path.display(),
        params.out.display(),
    );
    Ok(())
}
