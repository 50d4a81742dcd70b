//! Rotation/zoom/crop augmentation applied identically to images and
//! rectangle annotations.

use image::{Rgb, RgbImage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Sample;
use crate::geometry::Image2;

/// One augmentation draw. The forward point map is
/// `F(p) = R(rotation) * (p - c) * zoom + c - crop_offset`
/// about the image center c; images are warped by inverse sampling with
/// clamp-to-edge, annotations by the forward map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentSpec {
    /// Radians in [-pi/2, pi/2].
    pub rotation: f64,
    /// Scale factor in [0.5, 1.0].
    pub zoom: f64,
    /// Crop shift in pixels.
    pub crop_offset: (f64, f64),
}

impl AugmentSpec {
    pub fn identity() -> Self {
        AugmentSpec {
            rotation: 0.0,
            zoom: 1.0,
            crop_offset: (0.0, 0.0),
        }
    }

    /// Uniform draw over the frozen augmentation ranges; the crop offset
    /// spans +-`max_offset` pixels.
    pub fn sample(rng: &mut ChaCha8Rng, max_offset: f64) -> Self {
        AugmentSpec {
            rotation: rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2),
            zoom: rng.gen_range(0.5..1.0),
            crop_offset: (
                rng.gen_range(-max_offset..=max_offset),
                rng.gen_range(-max_offset..=max_offset),
            ),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.5..=1.0).contains(&self.zoom) {
            return Err(format!("zoom {} outside [0.5, 1.0]", self.zoom));
        }
        let half = std::f64::consts::FRAC_PI_2;
        if !(-half..=half).contains(&self.rotation) {
            return Err(format!("rotation {} outside [-pi/2, pi/2]", self.rotation));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.rotation == 0.0 && self.zoom == 1.0 && self.crop_offset == (0.0, 0.0)
    }
}

fn bilinear_rgb(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let w = img.width() as f64;
    let h = img.height() as f64;
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let p00 = img.get_pixel(x0, y0).0[ch] as f64;
        let p10 = img.get_pixel(x1, y0).0[ch] as f64;
        let p01 = img.get_pixel(x0, y1).0[ch] as f64;
        let p11 = img.get_pixel(x1, y1).0[ch] as f64;
        let v = p00 * (1.0 - fx) * (1.0 - fy)
            + p10 * fx * (1.0 - fy)
            + p01 * (1.0 - fx) * fy
            + p11 * fx * fy;
        out[ch] = v.round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

fn bilinear_depth(img: &Image2<f32>, x: f64, y: f64) -> f32 {
    let w = img.width() as f64;
    let h = img.height() as f64;
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    img.get(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + img.get(x1, y0) * fx * (1.0 - fy)
        + img.get(x0, y1) * (1.0 - fx) * fy
        + img.get(x1, y1) * fx * fy
}

/// Applies `spec` to images and rectangles alike. Rectangles with any
/// corner leaving the frame are dropped; an empty result logs a warning.
pub fn augment(s: &Sample, spec: &AugmentSpec) -> Sample {
    spec.validate().expect("augment spec within frozen ranges");
    if spec.is_identity() {
        return s.clone();
    }
    let (w, h) = s.dims();
    let c = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = spec.rotation.sin_cos();
    // Inverse map for image resampling.
    let inv = |qx: f64, qy: f64| -> (f64, f64) {
        let dx = (qx + spec.crop_offset.0 - c.0) / spec.zoom;
        let dy = (qy + spec.crop_offset.1 - c.1) / spec.zoom;
        (c.0 + dx * cos + dy * sin, c.1 - dx * sin + dy * cos)
    };

    let rgb = s.rgb.as_ref().map(|img| {
        RgbImage::from_fn(img.width(), img.height(), |x, y| {
            let (sx, sy) = inv(x as f64, y as f64);
            bilinear_rgb(img, sx, sy)
        })
    });
    let depth = s.depth.as_ref().map(|img| {
        let mut out = Image2::new(img.width(), img.height(), 0.0f32);
        for y in 0..img.height() {
            for x in 0..img.width() {
                let (sx, sy) = inv(x as f64, y as f64);
                out.set(x, y, bilinear_depth(img, sx, sy));
            }
        }
        out
    });

    let shift = (-spec.crop_offset.0, -spec.crop_offset.1);
    let rectangles: Vec<_> = s
        .rectangles
        .iter()
        .map(|r| r.transformed(c, spec.rotation, spec.zoom, shift))
        .filter(|r| {
            r.corners()
                .iter()
                .all(|&(x, y)| x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64)
        })
        .collect();
    if rectangles.is_empty() && !s.rectangles.is_empty() {
        log::warn!("augmentation dropped every rectangle of sample {}", s.id);
    }

    Sample {
        id: s.id.clone(),
        object_id: s.object_id.clone(),
        source: s.source,
        rgb,
        depth,
        rectangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;
    use crate::geometry::GraspRectangle;
    use rand::SeedableRng;

    fn sample() -> Sample {
        let rgb = RgbImage::from_fn(64, 64, |x, y| {
            Rgb([(4 * x % 256) as u8, (4 * y % 256) as u8, 128])
        });
        Sample {
            id: "a".into(),
            object_id: "o".into(),
            source: Source::Synthetic,
            rgb: Some(rgb),
            depth: Some(Image2::new(64, 64, 0.8)),
            rectangles: vec![GraspRectangle::new((40.0, 28.0), 0.3, 18.0, 9.0)],
        }
    }

    #[test]
    fn identity_spec_is_a_noop() {
        let s = sample();
        let out = augment(&s, &AugmentSpec::identity());
        assert_eq!(out.rectangles, s.rectangles);
        assert_eq!(out.rgb.as_ref().unwrap().as_raw(), s.rgb.as_ref().unwrap().as_raw());
    }

    #[test]
    fn quarter_turn_rotates_corners_about_center() {
        let s = sample();
        let spec = AugmentSpec {
            rotation: std::f64::consts::FRAC_PI_2,
            zoom: 1.0,
            crop_offset: (0.0, 0.0),
        };
        let out = augment(&s, &spec);
        assert_eq!(out.rectangles.len(), 1);
        let c = (31.5, 31.5);
        let rot = |p: (f64, f64)| (c.0 - (p.1 - c.1), c.1 + (p.0 - c.0));
        let expect = s.rectangles[0].corners().map(rot);
        let got = out.rectangles[0].corners();
        // the corner lists may differ by cyclic shift; compare as sets
        for e in expect {
            assert!(
                got.iter().any(|g| (g.0 - e.0).abs() < 0.5 && (g.1 - e.1).abs() < 0.5),
                "missing corner {e:?} in {got:?}"
            );
        }
    }

    #[test]
    fn half_zoom_halves_rectangle_width() {
        let s = sample();
        let spec = AugmentSpec {
            rotation: 0.0,
            zoom: 0.5,
            crop_offset: (0.0, 0.0),
        };
        let out = augment(&s, &spec);
        assert!((out.rectangles[0].width - 9.0).abs() < 1e-9);
        assert!((out.rectangles[0].height - 4.5).abs() < 1e-9);
    }

    #[test]
    fn out_of_frame_rectangles_are_dropped() {
        let mut s = sample();
        s.rectangles = vec![GraspRectangle::new((60.0, 32.0), 0.0, 20.0, 10.0)];
        let spec = AugmentSpec {
            rotation: 0.0,
            zoom: 1.0,
            crop_offset: (-10.0, 0.0),
        };
        let out = augment(&s, &spec);
        assert!(out.rectangles.is_empty());
    }

    #[test]
    fn sampled_specs_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let spec = AugmentSpec::sample(&mut rng, 6.0);
            spec.validate().unwrap();
            assert!(spec.crop_offset.0.abs() <= 6.0);
        }
    }
}
