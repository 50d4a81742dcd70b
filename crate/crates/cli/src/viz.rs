//! Overlay and heatmap rendering for inference outputs.

use graspforge_core::geometry::{decode_angle, GraspMaps, GraspRectangle, Image2};
use image::{Rgb, RgbImage};

const SIDE_COLOR: Rgb<u8> = Rgb([235, 60, 40]); // edges parallel to the closing direction
const PLATE_COLOR: Rgb<u8> = Rgb([40, 90, 235]); // finger plates

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (mut x0, mut y0) = (a.0.round() as i64, a.1.round() as i64);
    let (x1, y1) = (b.0.round() as i64, b.1.round() as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x0 >= 0 && y0 >= 0 && x0 < w && y0 < h {
            img.put_pixel(x0 as u32, y0 as u32, color);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Draws grasp rectangles: the two edges parallel to the closing
/// direction in red, the finger plates in blue.
pub fn draw_rectangles(img: &mut RgbImage, rects: &[GraspRectangle]) {
    for r in rects {
        let c = r.corners();
        draw_line(img, c[0], c[1], SIDE_COLOR);
        draw_line(img, c[2], c[3], SIDE_COLOR);
        draw_line(img, c[1], c[2], PLATE_COLOR);
        draw_line(img, c[3], c[0], PLATE_COLOR);
    }
}

fn to_gray(img: &Image2<f32>, lo: f32, hi: f32) -> image::GrayImage {
    let span = (hi - lo).max(1e-12);
    image::GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = ((img.get(x as usize, y as usize) - lo) / span).clamp(0.0, 1.0);
        image::Luma([(v * 255.0) as u8])
    })
}

/// Grayscale visualizations of the three output map families:
/// quality and width in [0,1], the decoded angle over its full range.
pub fn heatmaps(maps: &GraspMaps) -> (image::GrayImage, image::GrayImage, image::GrayImage) {
    let (w, h) = maps.dims();
    let mut angle = Image2::new(w, h, 0.0f32);
    for y in 0..h {
        for x in 0..w {
            let theta = decode_angle(maps.cos2t.get(x, y) as f64, maps.sin2t.get(x, y) as f64)
                .unwrap_or(0.0);
            angle.set(x, y, theta as f32);
        }
    }
    let half = std::f32::consts::FRAC_PI_2;
    (
        to_gray(&maps.quality, 0.0, 1.0),
        to_gray(&angle, -half, half),
        to_gray(&maps.width, 0.0, 1.0),
    )
}

/// Renders a depth image as a grayscale RGB base for overlays when no
/// color frame exists.
pub fn depth_as_rgb(depth: &Image2<f32>) -> RgbImage {
    let lo = depth.as_slice().iter().copied().fold(f32::INFINITY, f32::min);
    let hi = depth
        .as_slice()
        .iter()
        .copied()
        .fold(f32::NEG_INFINITY, f32::max);
    let span = (hi - lo).max(1e-9);
    RgbImage::from_fn(depth.width() as u32, depth.height() as u32, |x, y| {
        let v = ((depth.get(x as usize, y as usize) - lo) / span * 255.0) as u8;
        Rgb([v, v, v])
    })
}
