//! Shared helpers for CLI integration tests. Not every test binary uses
//! every helper.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use mosaic_core::datagen::{ImageRef, InstructionInstance, Turn};

pub fn mosaic() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mosaic"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn mosaic");
    assert!(
        output.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

pub fn exit_code(cmd: &mut Command) -> (i32, String) {
    let output = cmd.output().expect("spawn mosaic");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

pub fn gradient_image(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        Rgb([
            (x % 251) as u8,
            (y % 241) as u8,
            ((x * 3 + y * 7) % 256) as u8,
        ])
    })
}

/// Write deterministic gradient PNGs and return their paths.
pub fn write_images(dir: &Path, dims: &[(u32, u32)]) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    dims.iter()
        .enumerate()
        .map(|(i, &(w, h))| {
            let path = dir.join(format!("img{i:02}.png"));
            gradient_image(w, h).save(&path).unwrap();
            path
        })
        .collect()
}

/// Single-image QA instances for datagen/annotate tests.
pub fn write_instance_file(path: &Path, count: usize) -> Vec<InstructionInstance> {
    let instances: Vec<InstructionInstance> = (0..count)
        .map(|i| {
            InstructionInstance::new(
                vec![ImageRef::inline(vec![i as u8; 24])],
                vec![
                    Turn::user(format!("what does figure {i} show?")),
                    Turn::assistant(format!("finding {i}")),
                ],
                "test",
            )
        })
        .collect();
    mosaic_core::datagen::write_instances(path, &instances).unwrap();
    instances
}

pub fn file_digest(path: &Path) -> String {
    mosaic_core::datagen::sha256_hex(&std::fs::read(path).unwrap())
}
