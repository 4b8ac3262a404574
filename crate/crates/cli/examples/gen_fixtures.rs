//! Generate a small set of deterministic gradient images for trying out the
//! pipeline: `cargo run -p mosaic-cli --example gen_fixtures -- <dir>`.

use image::{Rgb, RgbImage};

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".to_string());
    std::fs::create_dir_all(&dir).unwrap();
    let dims = [
        (1092u32, 728u32),
        (364, 364),
        (200, 150),
        (800, 500),
        (1456, 1456),
    ];
    for (i, (w, h)) in dims.iter().enumerate() {
        let img = RgbImage::from_fn(*w, *h, |x, y| {
            Rgb([
                (x % 251) as u8,
                (y % 241) as u8,
                ((x * 3 + y * 7) % 256) as u8,
            ])
        });
        img.save(format!("{dir}/img{i}.png")).unwrap();
    }
    println!("wrote {} images to {dir}", dims.len());
}
