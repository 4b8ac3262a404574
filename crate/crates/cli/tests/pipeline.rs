//! End-to-end CLI behavior: exit codes, determinism, idempotence.

mod common;

use common::*;
use mosaic_cli::manifest::Manifest;

#[test]
fn plan_writes_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_images(&dir.path().join("images"), &[(1092, 728), (150, 200)]);
    let manifest_path = dir.path().join("manifest.json");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "50"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(&manifest_path),
    );

    let manifest = Manifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.images.len(), 2);
    assert_eq!(manifest.images[0].s_alloc, 6);
    assert_eq!(
        (manifest.images[0].grid.rows, manifest.images[0].grid.cols),
        (2, 3)
    );
    assert!(manifest.images[1].dedup_single_tile);
    assert_eq!(manifest.totals.sub_tiles, 6);
    assert_eq!(manifest.totals.global_tiles, 2);
}

#[test]
fn plan_accepts_jpeg_input() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    std::fs::create_dir_all(&images).unwrap();
    gradient_image(800, 600)
        .save(images.join("photo.jpg"))
        .unwrap();
    let manifest_path = dir.path().join("manifest.json");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "10"])
            .arg("--images")
            .arg(&images)
            .arg("--out")
            .arg(&manifest_path),
    );
    let manifest = Manifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.images[0].id, "photo");
    assert_eq!(
        (manifest.images[0].height_px, manifest.images[0].width_px),
        (600, 800)
    );
}

#[test]
fn plan_zero_budget_exits_2_naming_image_count() {
    let dir = tempfile::tempdir().unwrap();
    write_images(&dir.path().join("images"), &[(100, 100), (100, 100)]);
    let (code, stderr) = exit_code(
        mosaic()
            .args(["plan", "--budget", "0"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(dir.path().join("m.json")),
    );
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(
        stderr.contains("2 images"),
        "diagnostic must name the image count: {stderr}"
    );
}

#[test]
fn plan_missing_image_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = exit_code(
        mosaic()
            .args(["plan", "--budget", "10"])
            .arg("--images")
            .arg(dir.path().join("nowhere"))
            .arg("--out")
            .arg(dir.path().join("m.json")),
    );
    assert_eq!(code, 3);
}

#[test]
fn budget_sweep_totals_non_decreasing() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    write_images(
        &images,
        &[(1456, 1456), (2184, 1092), (728, 728), (3000, 2000)],
    );
    let mut last = 0;
    for budget in ["25", "50", "75"] {
        let manifest_path = dir.path().join(format!("m{budget}.json"));
        run_ok(
            mosaic()
                .args(["plan", "--budget", budget])
                .arg("--images")
                .arg(&images)
                .arg("--out")
                .arg(&manifest_path),
        );
        let manifest = Manifest::load(&manifest_path).unwrap();
        assert!(
            manifest.totals.sub_tiles >= last,
            "sub-tiles dropped from {last} at budget {budget}"
        );
        last = manifest.totals.sub_tiles;
    }
}

#[test]
fn tile_is_idempotent_and_counts_match() {
    let dir = tempfile::tempdir().unwrap();
    write_images(&dir.path().join("images"), &[(800, 500), (364, 364)]);
    let manifest_path = dir.path().join("manifest.json");
    let tiles = dir.path().join("tiles");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "50"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(&manifest_path),
    );
    run_ok(
        mosaic()
            .arg("tile")
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(&tiles),
    );

    let manifest = Manifest::load(&manifest_path).unwrap();
    let tile_files: Vec<_> = std::fs::read_dir(&tiles)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(
        tile_files.len(),
        manifest.totals.sub_tiles + manifest.totals.global_tiles
    );

    let digests: Vec<String> = tile_files.iter().map(|p| file_digest(p)).collect();
    run_ok(
        mosaic()
            .arg("tile")
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(&tiles),
    );
    let digests_again: Vec<String> = tile_files.iter().map(|p| file_digest(p)).collect();
    assert_eq!(
        digests, digests_again,
        "re-running tile must be byte-identical"
    );

    // Reassembly oracle on the tiles read back from disk: row-major
    // concatenation reproduces the padded canvas byte-exactly.
    for entry in &manifest.images {
        if entry.dedup_single_tile {
            continue;
        }
        let source = image::open(&entry.path).unwrap().to_rgb8();
        let grid = mosaic_core::partitioner::search_grid(
            entry.height_px,
            entry.width_px,
            entry.s_alloc,
            &manifest.geometry,
        );
        let canvas = mosaic_core::partitioner::pad_resize(&source, &grid).unwrap();
        let v = manifest.geometry.tile_resolution;
        let mut rebuilt = image::RgbImage::new(entry.canvas.w, entry.canvas.h);
        for (i, tile_path) in entry.tile_paths.iter().enumerate() {
            let tile = image::open(tile_path).unwrap().to_rgb8();
            let row = i as u32 / entry.grid.cols;
            let col = i as u32 % entry.grid.cols;
            image::imageops::replace(&mut rebuilt, &tile, (col * v) as i64, (row * v) as i64);
        }
        assert_eq!(rebuilt.as_raw(), canvas.as_raw(), "image {}", entry.id);
    }
}

#[test]
fn tile_unreadable_image_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let images = write_images(&dir.path().join("images"), &[(400, 300)]);
    let manifest_path = dir.path().join("manifest.json");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "10"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(&manifest_path),
    );
    std::fs::remove_file(&images[0]).unwrap();
    let (code, _) = exit_code(
        mosaic()
            .arg("tile")
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(dir.path().join("tiles")),
    );
    assert_eq!(code, 3);
}

#[test]
fn encode_records_shapes_and_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    write_images(&dir.path().join("images"), &[(800, 500)]);
    let manifest_path = dir.path().join("manifest.json");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "50"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(&manifest_path),
    );
    run_ok(
        mosaic()
            .arg("tile")
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(dir.path().join("tiles")),
    );
    run_ok(
        mosaic()
            .args(["encode", "--shuffle", "4"])
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(dir.path().join("tensors")),
    );

    let manifest = Manifest::load(&manifest_path).unwrap();
    let entry = &manifest.images[0];
    assert_eq!(entry.tensor_dims, Some([13, 13, 4608]));
    assert_eq!(entry.tensor_paths.len(), entry.emitted_tiles());

    // Re-encode one tile in memory; the file must match bit for bit.
    let tile = image::open(&entry.tile_paths[0]).unwrap().to_rgb8();
    let raw = mosaic_core::shuffler::mock_encode(&tile, &manifest.geometry).unwrap();
    let shuffled = mosaic_core::shuffler::pixel_shuffle(&raw, 4).unwrap();
    let from_disk = mosaic_core::ften::read_tensor_file(&entry.tensor_paths[0]).unwrap();
    assert_eq!(from_disk, shuffled);

    // n = 1 is a no-op shuffle.
    run_ok(
        mosaic()
            .args(["encode", "--shuffle", "1"])
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--out")
            .arg(dir.path().join("tensors1")),
    );
    let manifest = Manifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.images[0].tensor_dims, Some([26, 26, 1152]));
}

#[test]
fn sequence_accepts_12_rejects_13_unshuffled() {
    let dir = tempfile::tempdir().unwrap();
    for count in [12usize, 13] {
        let images = dir.path().join(format!("images{count}"));
        write_images(&images, &vec![(100, 100); count]);
        let manifest_path = dir.path().join(format!("manifest{count}.json"));
        run_ok(
            mosaic()
                .env("MOSAIC_SHUFFLE_N", "1")
                .args(["plan", "--budget", "50"])
                .arg("--images")
                .arg(&images)
                .arg("--out")
                .arg(&manifest_path),
        );
        let out = dir.path().join(format!("seq{count}.txt"));
        let (code, stderr) = exit_code(
            mosaic()
                .args(["sequence", "--max-tokens", "8192"])
                .arg("--manifest")
                .arg(&manifest_path)
                .arg("--out")
                .arg(&out),
        );
        if count == 12 {
            assert_eq!(code, 0, "12 images must fit: {stderr}");
        } else {
            assert_eq!(code, 5, "13 images must overflow: {stderr}");
            assert!(
                stderr.contains("596"),
                "overflow amount must be 596: {stderr}"
            );
        }
        assert!(out.exists(), "sequence file is written either way");
    }
}

#[test]
fn sequence_with_text_inserts() {
    let dir = tempfile::tempdir().unwrap();
    write_images(&dir.path().join("images"), &[(400, 300), (500, 600)]);
    let manifest_path = dir.path().join("manifest.json");
    run_ok(
        mosaic()
            .args(["plan", "--budget", "50"])
            .arg("--images")
            .arg(dir.path().join("images"))
            .arg("--out")
            .arg(&manifest_path),
    );
    let text_path = dir.path().join("text.jsonl");
    std::fs::write(
        &text_path,
        "{\"position\":0,\"text\":\"Compare the figures.\"}\n{\"position\":2,\"text\":\"Answer briefly.\"}\n",
    )
    .unwrap();
    let out = dir.path().join("seq.txt");
    run_ok(
        mosaic()
            .arg("sequence")
            .arg("--manifest")
            .arg(&manifest_path)
            .arg("--text")
            .arg(&text_path)
            .arg("--out")
            .arg(&out),
    );
    let sequence = std::fs::read_to_string(&out).unwrap();
    assert!(sequence.starts_with("Compare the figures.\n"));
    assert!(sequence.ends_with("Answer briefly.\n"));
    let parsed = mosaic_core::sequencer::parse_sequence(
        &sequence,
        &mosaic_core::sequencer::WhitespaceEstimator,
    )
    .unwrap();
    let manifest = Manifest::load(&manifest_path).unwrap();
    assert_eq!(parsed.feature_tokens, manifest.totals.feature_tokens);
}

#[test]
fn datagen_assemble_is_seed_deterministic_and_validates_k() {
    let dir = tempfile::tempdir().unwrap();
    let instances = dir.path().join("instances.jsonl");
    write_instance_file(&instances, 10);

    let out_a = dir.path().join("a.jsonl");
    let out_b = dir.path().join("b.jsonl");
    for out in [&out_a, &out_b] {
        run_ok(
            mosaic()
                .args([
                    "datagen", "assemble", "-k", "3", "--seed", "11", "--count", "5",
                ])
                .arg("--instances")
                .arg(&instances)
                .arg("--out")
                .arg(out),
        );
    }
    assert_eq!(file_digest(&out_a), file_digest(&out_b));

    let (code, _) = exit_code(
        mosaic()
            .args(["datagen", "assemble", "-k", "5", "--seed", "1"])
            .arg("--instances")
            .arg(&instances)
            .arg("--out")
            .arg(dir.path().join("bad.jsonl")),
    );
    assert_eq!(code, 2, "clap range error for k=5 is a usage error");
}

#[test]
fn datagen_tables_filters_oversized_and_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let tables = dir.path().join("tables.jsonl");
    let small = serde_json::json!({
        "header": ["name", "value"],
        "rows": [["a", "1"], ["b", "2"]],
        "style_id": 2
    });
    let rows: Vec<Vec<String>> = (0..21).map(|r| vec![format!("r{r}"), "x".into()]).collect();
    let big = serde_json::json!({"header": ["name", "value"], "rows": rows, "style_id": 0});
    std::fs::write(&tables, format!("{small}\n{big}\n")).unwrap();

    let out = dir.path().join("rendered");
    let output = run_ok(
        mosaic()
            .args(["datagen", "tables", "--seed", "3"])
            .arg("--tables")
            .arg(&tables)
            .arg("--out")
            .arg(&out),
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("1 filtered"), "{stdout}");
    assert!(out.join("table0000.png").exists());
    assert!(!out.join("table0001.png").exists());
}

#[test]
fn datagen_dedup_removes_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let instances_path = dir.path().join("instances.jsonl");
    let mut instances = write_instance_file(&instances_path, 4);
    let dup = instances[1].clone();
    instances.push(dup);
    mosaic_core::datagen::write_instances(&instances_path, &instances).unwrap();

    let out = dir.path().join("dedup.jsonl");
    run_ok(
        mosaic()
            .args(["datagen", "dedup"])
            .arg("--instances")
            .arg(&instances_path)
            .arg("--out")
            .arg(&out),
    );
    let kept = mosaic_core::datagen::read_instances(&out).unwrap();
    assert_eq!(kept.len(), 4);
}

#[test]
fn annotate_without_credential_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let instances = dir.path().join("instances.jsonl");
    write_instance_file(&instances, 2);
    let (code, stderr) = exit_code(
        mosaic()
            .env_remove("MOSAIC_API_KEY")
            .arg("annotate")
            .arg("--instances")
            .arg(&instances)
            .arg("--out")
            .arg(dir.path().join("out.jsonl")),
    );
    assert_eq!(code, 6, "stderr: {stderr}");
    assert!(stderr.contains("MOSAIC_API_KEY"), "{stderr}");
}

#[test]
fn annotate_against_mock_augments_and_logs() {
    use mosaic_annotator::mock::{Fault, FaultPlan, MockServer, MockServerConfig};

    let dir = tempfile::tempdir().unwrap();
    let instances = dir.path().join("instances.jsonl");
    write_instance_file(&instances, 6);

    let server = MockServer::start(MockServerConfig {
        faults: FaultPlan::Script(vec![Fault::Malformed]),
        ..MockServerConfig::default()
    })
    .unwrap();
    let endpoint_config = dir.path().join("endpoint.toml");
    std::fs::write(
        &endpoint_config,
        format!(
            "[endpoint]\nbase_url = \"{}\"\nmodel = \"mock\"\nbackoff_base_ms = 10\n",
            server.base_url()
        ),
    )
    .unwrap();

    let out = dir.path().join("augmented.jsonl");
    let failures = dir.path().join("failures.jsonl");
    run_ok(
        mosaic()
            .env("MOSAIC_API_KEY", "test")
            .arg("annotate")
            .arg("--instances")
            .arg(&instances)
            .arg("--endpoint-config")
            .arg(&endpoint_config)
            .arg("--out")
            .arg(&out)
            .arg("--failures")
            .arg(&failures)
            .arg("--raw-log")
            .arg(dir.path().join("raw.jsonl")),
    );

    let augmented = mosaic_core::datagen::read_instances(&out).unwrap();
    assert_eq!(augmented.len(), 6, "no data loss");
    // First request hit the scripted malformed reply; the rest succeeded.
    assert_eq!(
        augmented.iter().filter(|i| i.rationale.is_some()).count(),
        5
    );
    let failure_lines = std::fs::read_to_string(&failures).unwrap();
    assert_eq!(failure_lines.lines().count(), 1);
}

#[test]
fn eval_reproduces_hand_scores() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds.jsonl");
    std::fs::write(
        &preds,
        concat!(
            "{\"id\":\"a\",\"prediction\":\"hello\",\"golds\":[\"hello\"]}\n",
            "{\"id\":\"b\",\"prediction\":\"hello\",\"golds\":[\"hallo\"]}\n",
            "{\"id\":\"c\",\"prediction\":\"abc\",\"golds\":[\"xyz\"]}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("report.json");
    run_ok(
        mosaic()
            .args(["eval", "--metric", "anls", "--tau", "0.5"])
            .arg("--predictions")
            .arg(&preds)
            .arg("--out")
            .arg(&out),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let scores: Vec<f64> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["anls_score"].as_f64().unwrap())
        .collect();
    assert_eq!(scores, vec![1.0, 0.8, 0.0]);
    assert!((report["mean"].as_f64().unwrap() - 0.6).abs() < 1e-12);

    // Exact match on an identical file scores 1.0.
    let same = dir.path().join("same.jsonl");
    std::fs::write(&same, "{\"id\":1,\"prediction\":\"x\",\"golds\":[\"x\"]}\n").unwrap();
    let out2 = dir.path().join("report2.json");
    run_ok(
        mosaic()
            .args(["eval", "--metric", "exact"])
            .arg("--predictions")
            .arg(&same)
            .arg("--out")
            .arg(&out2),
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out2).unwrap()).unwrap();
    assert_eq!(report["mean"].as_f64().unwrap(), 1.0);

    // Empty input exits 7.
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let (code, _) = exit_code(
        mosaic()
            .arg("eval")
            .arg("--predictions")
            .arg(&empty)
            .arg("--out")
            .arg(dir.path().join("r3.json")),
    );
    assert_eq!(code, 7);
}
