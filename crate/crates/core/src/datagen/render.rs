//! Deterministic table-to-image rendering with an embedded bitmap font.
//!
//! The output is a plain pixel grid: column widths grow with content, every
//! cell's text is drawn in full (no clipping), and the same `TableSpec` plus
//! style always produces the same bytes. Tables with more than 20 data rows
//! are rejected to keep the rendered text legible.

use image::{Rgb, RgbImage};

use super::font::{glyph, pixel_set, GLYPH_HEIGHT, GLYPH_WIDTH};
use super::{DatagenError, TableSpec};

/// Maximum data rows a renderable table may have.
pub const MAX_RENDER_ROWS: usize = 20;

const SCALE: u32 = 2;
const CELL_PAD_X: u32 = 8;
const CELL_PAD_Y: u32 = 6;
const BORDER: u32 = 1;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const BAND: Rgb<u8> = Rgb([226, 232, 240]);
const HEADER_BG: Rgb<u8> = Rgb([45, 55, 72]);
const HEADER_FG: Rgb<u8> = Rgb([255, 255, 255]);
const GRID: Rgb<u8> = Rgb([60, 60, 60]);

/// Built-in rendering styles, selected by `TableSpec::style_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableStyle {
    /// White background, plain grid lines.
    PlainGrid,
    /// Alternating row backgrounds.
    BandedRows,
    /// Dark header row with bold (double-struck) header text.
    BoldHeader,
}

impl From<u8> for TableStyle {
    fn from(id: u8) -> Self {
        match id % 3 {
            0 => TableStyle::PlainGrid,
            1 => TableStyle::BandedRows,
            _ => TableStyle::BoldHeader,
        }
    }
}

/// Render a table as an RGB image.
///
/// Errors with `FilteredOut` when the table exceeds [`MAX_RENDER_ROWS`] data
/// rows and `EmptyTable` when there is no header or no data row.
pub fn render_table(table: &TableSpec) -> Result<RgbImage, DatagenError> {
    if table.rows.len() > MAX_RENDER_ROWS {
        return Err(DatagenError::FilteredOut {
            rows: table.rows.len(),
        });
    }
    if table.header.is_empty() || table.rows.is_empty() {
        return Err(DatagenError::EmptyTable);
    }
    table.check_rect()?;
    let style = TableStyle::from(table.style_id);

    let cols = table.column_count();
    let char_w = GLYPH_WIDTH * SCALE;
    let char_h = GLYPH_HEIGHT * SCALE;
    // Column width fits the longest cell in that column.
    let col_chars: Vec<u32> = (0..cols)
        .map(|c| {
            table
                .rows
                .iter()
                .map(|r| r[c].chars().count())
                .chain([table.header[c].chars().count()])
                .max()
                .unwrap_or(1)
                .max(1) as u32
        })
        .collect();
    let col_widths: Vec<u32> = col_chars
        .iter()
        .map(|&n| n * char_w + 2 * CELL_PAD_X)
        .collect();
    let row_h = char_h + 2 * CELL_PAD_Y;
    let total_rows = table.rows.len() as u32 + 1;
    let width = col_widths.iter().sum::<u32>() + BORDER * (cols as u32 + 1);
    let height = row_h * total_rows + BORDER * (total_rows + 1);

    let mut img = RgbImage::from_pixel(width, height, WHITE);

    // Backgrounds.
    for row in 0..total_rows {
        let y0 = BORDER + row * (row_h + BORDER);
        let bg = match (style, row) {
            (TableStyle::BoldHeader, 0) => HEADER_BG,
            (TableStyle::BandedRows, r) if r % 2 == 1 => BAND,
            _ => WHITE,
        };
        if bg != WHITE {
            for y in y0..y0 + row_h {
                for x in 0..width {
                    img.put_pixel(x, y, bg);
                }
            }
        }
    }

    // Grid lines.
    for row in 0..=total_rows {
        let y = row * (row_h + BORDER);
        for x in 0..width {
            img.put_pixel(x, y, GRID);
        }
    }
    let mut x = 0;
    for width in &col_widths {
        for y in 0..height {
            img.put_pixel(x, y, GRID);
        }
        x += BORDER + width;
    }
    for y in 0..height {
        img.put_pixel(x, y, GRID);
    }

    // Text.
    for (row, cells) in std::iter::once(&table.header)
        .chain(table.rows.iter())
        .enumerate()
    {
        let y0 = BORDER + row as u32 * (row_h + BORDER) + CELL_PAD_Y;
        let header = row == 0;
        let color = if header && style == TableStyle::BoldHeader {
            HEADER_FG
        } else {
            BLACK
        };
        let bold = header && style == TableStyle::BoldHeader;
        let mut cell_x = BORDER + CELL_PAD_X;
        for (col, text) in cells.iter().enumerate() {
            draw_text(&mut img, text, cell_x, y0, color, bold);
            cell_x += col_widths[col] + BORDER;
        }
    }

    Ok(img)
}

fn draw_text(img: &mut RgbImage, text: &str, x0: u32, y0: u32, color: Rgb<u8>, bold: bool) {
    let char_w = GLYPH_WIDTH * SCALE;
    for (i, c) in text.chars().enumerate() {
        let g = glyph(c);
        let gx0 = x0 + i as u32 * char_w;
        for gy in 0..GLYPH_HEIGHT {
            for gx in 0..GLYPH_WIDTH {
                if !pixel_set(g, gx, gy) {
                    continue;
                }
                for sy in 0..SCALE {
                    for sx in 0..SCALE {
                        let px = gx0 + gx * SCALE + sx;
                        let py = y0 + gy * SCALE + sy;
                        img.put_pixel(px, py, color);
                        if bold && px + 1 < img.width() {
                            img.put_pixel(px + 1, py, color);
                        }
                    }
                }
            }
        }
    }
}
