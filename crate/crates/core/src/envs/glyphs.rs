//! Synthetic 28x28 digit glyphs, used when no MNIST files are available.
//!
//! Each class is a seven-segment style stroke drawing rendered with random
//! shift, scale, slant, stroke width and pixel noise.

use rand::Rng;

pub const GLYPH_SIDE: usize = 28;

// Segments: top, top-left, top-right, middle, bottom-left, bottom-right, bottom.
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, false, true, true, true],
    [false, false, true, false, false, true, false],
    [true, false, true, true, true, false, true],
    [true, false, true, true, false, true, true],
    [false, true, true, true, false, true, false],
    [true, true, false, true, false, true, true],
    [true, true, false, true, true, true, true],
    [true, false, true, false, false, true, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

// Endpoints in a unit box, x to the right and y downward.
const SEGMENT_ENDS: [((f64, f64), (f64, f64)); 7] = [
    ((0.0, 0.0), (1.0, 0.0)),
    ((0.0, 0.0), (0.0, 0.5)),
    ((1.0, 0.0), (1.0, 0.5)),
    ((0.0, 0.5), (1.0, 0.5)),
    ((0.0, 0.5), (0.0, 1.0)),
    ((1.0, 0.5), (1.0, 1.0)),
    ((0.0, 1.0), (1.0, 1.0)),
];

fn dist_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// One glyph of class `digit` as 784 values in `[0, 1]`.
pub fn render_glyph<R: Rng + ?Sized>(digit: u8, rng: &mut R) -> Vec<f64> {
    assert!(digit < 10, "digit out of range");
    let width = rng.random_range(8.0..12.0);
    let height = rng.random_range(14.0..19.0);
    let cx = 14.0 + rng.random_range(-2.0..2.0);
    let cy = 14.0 + rng.random_range(-2.0..2.0);
    let slant = rng.random_range(-0.25..0.25);
    let stroke = rng.random_range(1.0..1.8);
    let to_px = |(u, v): (f64, f64)| {
        let y = cy + (v - 0.5) * height;
        let x = cx + (u - 0.5) * width - slant * (v - 0.5) * height;
        (x, y)
    };
    let strokes: Vec<_> = SEGMENTS[digit as usize]
        .iter()
        .zip(SEGMENT_ENDS)
        .filter(|(on, _)| **on)
        .map(|(_, (a, b))| (to_px(a), to_px(b)))
        .collect();
    let mut img = vec![0.0; GLYPH_SIDE * GLYPH_SIDE];
    for r in 0..GLYPH_SIDE {
        for c in 0..GLYPH_SIDE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let d = strokes
                .iter()
                .map(|&(a, b)| dist_to_segment(p, a, b))
                .fold(f64::INFINITY, f64::min);
            let ink = (1.0 - (d - stroke).max(0.0)).clamp(0.0, 1.0);
            let noise = rng.random_range(-0.05..0.05);
            img[r * GLYPH_SIDE + c] = (ink + noise).clamp(0.0, 1.0);
        }
    }
    img
}

/// `per_class` glyphs of each digit, ordered by class.
pub fn synthetic_glyph_set<R: Rng + ?Sized>(per_class: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut images = Vec::with_capacity(per_class * 10);
    let mut labels = Vec::with_capacity(per_class * 10);
    for digit in 0..10u8 {
        for _ in 0..per_class {
            images.push(render_glyph(digit, rng));
            labels.push(digit);
        }
    }
    (images, labels)
}
