//! Scene description and the deterministic renderer that turns it into a
//! stream bundle with exact rigid-motion flow.
//!
//! Objects traverse a closed elliptical path while spinning and pulsing in
//! scale; one object moves at a time, and every object is back at its start
//! pose when its lap ends. Anti-aliasing is off on purpose: a pixel belongs
//! to an object iff its center is inside the transformed shape, which keeps
//! masks, flow support, and the moving-region segmentation consistent.

use std::f64::consts::TAU;

use crate::coords::Pixel;
use crate::error::{Error, Result};
use crate::num::{c, Real};

use super::{FlowField, Frame, Mask, StreamBundle, StreamManifest};

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Uniform([u8; 3]),
    /// Two-tone checkerboard with square cells of the given side.
    Checker { a: [u8; 3], b: [u8; 3], cell: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Solid([u8; 3]),
    /// Stripes in object-local coordinates, so the texture moves with the
    /// object. Width is in local units.
    Stripes { a: [u8; 3], b: [u8; 3], width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Axis-aligned (in local coords) rectangle with full side lengths.
    Rectangle { width: f64, height: f64 },
    /// Equilateral triangle with the given circumradius, apex up.
    Triangle { circumradius: f64 },
    Circle { radius: f64 },
}

impl ShapeKind {
    fn bounding_radius(&self) -> f64 {
        match self {
            ShapeKind::Rectangle { width, height } => 0.5 * (width * width + height * height).sqrt(),
            ShapeKind::Triangle { circumradius } => *circumradius,
            ShapeKind::Circle { radius } => *radius,
        }
    }

    fn contains_local(&self, u: (f64, f64)) -> bool {
        match self {
            ShapeKind::Rectangle { width, height } => {
                u.0.abs() <= width * 0.5 && u.1.abs() <= height * 0.5
            }
            ShapeKind::Triangle { circumradius } => {
                // Equilateral, vertices at 90, 210, 330 degrees.
                let r = *circumradius;
                let v0 = (0.0, r);
                let v1 = (-(3.0f64).sqrt() * r / 2.0, -r / 2.0);
                let v2 = ((3.0f64).sqrt() * r / 2.0, -r / 2.0);
                point_in_triangle(u, v0, v1, v2)
            }
            ShapeKind::Circle { radius } => u.0 * u.0 + u.1 * u.1 <= radius * radius,
        }
    }
}

fn point_in_triangle(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
    let sign = |p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)| {
        (p1.0 - p3.0) * (p2.1 - p3.1) - (p2.0 - p3.0) * (p1.1 - p3.1)
    };
    let d1 = sign(p, a, b);
    let d2 = sign(p, b, c);
    let d3 = sign(p, c, a);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    /// Class name; the object's class id is its index + 1.
    pub name: String,
    pub shape: ShapeKind,
    pub fill: Fill,
    /// Center of the closed elliptical path, 1-based frame coordinates.
    pub orbit_center: (f64, f64),
    /// Path semi-axes in pixels; (0, 0) keeps the object in place.
    pub orbit_radius: (f64, f64),
    /// Path phase in radians (position along the ellipse at lap start).
    pub orbit_phase: f64,
    /// Full rotations of the object per lap (integral so every lap ends at
    /// the start pose).
    pub spin_turns: i32,
    /// Scale pulse amplitude: scale(tau) = 1 + amp * sin(2 pi tau / L).
    pub scale_amp: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    pos: (f64, f64),
    angle: f64,
    scale: f64,
}

impl ObjectSpec {
    /// Pose at local lap time `tau` in `0..=lap_frames`.
    fn pose(&self, tau: f64, lap_frames: f64) -> Pose {
        let phase = TAU * tau / lap_frames;
        let path_angle = phase + self.orbit_phase;
        Pose {
            pos: (
                self.orbit_center.0 + self.orbit_radius.0 * path_angle.cos(),
                self.orbit_center.1 + self.orbit_radius.1 * path_angle.sin(),
            ),
            angle: TAU * self.spin_turns as f64 * tau / lap_frames,
            scale: 1.0 + self.scale_amp * phase.sin(),
        }
    }
}

impl Pose {
    /// Frame coords of the local point `u`.
    fn to_frame(&self, u: (f64, f64)) -> (f64, f64) {
        let (s, a) = (self.scale, self.angle);
        let (ca, sa) = (a.cos(), a.sin());
        (
            self.pos.0 + s * (ca * u.0 - sa * u.1),
            self.pos.1 + s * (sa * u.0 + ca * u.1),
        )
    }

    /// Local coords of the frame point `q`.
    fn to_local(&self, q: (f64, f64)) -> (f64, f64) {
        let (dx, dy) = (q.0 - self.pos.0, q.1 - self.pos.1);
        let (ca, sa) = (self.angle.cos(), self.angle.sin());
        ((ca * dx + sa * dy) / self.scale, (-sa * dx + ca * dy) / self.scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// 1 (grayscale) or 3 (RGB).
    pub channels: u8,
    pub background: Background,
    pub objects: Vec<ObjectSpec>,
    pub laps_total: u32,
    pub lap_frames: u32,
}

impl SceneSpec {
    pub fn frame_count(&self) -> u32 {
        self.laps_total * self.lap_frames * self.objects.len() as u32
    }

    /// The object moving at frame `t` and its local lap time.
    fn active(&self, t: u32) -> (usize, u32) {
        let n = self.objects.len() as u32;
        let slot = t / self.lap_frames;
        ((slot % n) as usize, t % self.lap_frames)
    }

    fn validate(&self) -> Result<()> {
        if !(self.channels == 1 || self.channels == 3) {
            return Err(Error::validation("channels must be 1 or 3"));
        }
        if self.objects.is_empty() || self.laps_total == 0 || self.lap_frames == 0 {
            return Err(Error::validation("scene needs objects, laps and lap frames"));
        }
        for obj in &self.objects {
            if obj.name.is_empty()
                || !obj.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_')
            {
                return Err(Error::validation(format!(
                    "object name {:?} must be non-empty [A-Za-z0-9_-]",
                    obj.name
                )));
            }
            if obj.scale_amp.abs() >= 1.0 {
                return Err(Error::validation(format!("object {}: |scale_amp| must be < 1", obj.name)));
            }
        }
        Ok(())
    }
}

fn quantize<T: Real>(byte: u8) -> T {
    c::<T>(byte as f64 / 255.0)
}

fn gray_level(rgb: [u8; 3]) -> u8 {
    (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64).round() as u8
}

fn fill_color(fill: &Fill, u: (f64, f64)) -> [u8; 3] {
    match fill {
        Fill::Solid(rgb) => *rgb,
        Fill::Stripes { a, b, width } => {
            let band = (u.0 / width).floor() as i64;
            if band.rem_euclid(2) == 0 {
                *a
            } else {
                *b
            }
        }
    }
}

fn background_color(bg: &Background, p: Pixel) -> [u8; 3] {
    match bg {
        Background::Uniform(rgb) => *rgb,
        Background::Checker { a, b, cell } => {
            let cx = (p.x - 1) / cell;
            let cy = (p.y - 1) / cell;
            if (cx + cy) % 2 == 0 {
                *a
            } else {
                *b
            }
        }
    }
}

/// Renders the scene into a complete bundle. Deterministic given the spec
/// and seed (the seed is recorded in the manifest and consumed by runs).
///
/// Flow is exact: the displacement a material point undergoes between the
/// current pose and the next one, quantized through `f32` so the on-disk
/// motion format loses nothing.
pub fn generate_stream<T: Real>(spec: &SceneSpec, seed: u64) -> Result<StreamBundle<T>> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let frame_count = spec.frame_count();
    let n = spec.objects.len();
    let lf = spec.lap_frames as f64;

    let mut laps: Vec<super::LapRanges> = vec![Vec::new(); n];
    for t in (0..frame_count).step_by(spec.lap_frames as usize) {
        let (obj, _) = spec.active(t);
        laps[obj].push((t, t + spec.lap_frames - 1));
    }

    let mut class_names = vec!["unknown".to_string()];
    class_names.extend(spec.objects.iter().map(|o| o.name.clone()));

    let manifest = StreamManifest {
        w,
        h,
        channels: spec.channels,
        frame_count,
        class_names,
        laps,
        seed,
    };

    let mut frames = Vec::with_capacity(frame_count as usize);
    let mut flows = Vec::with_capacity(frame_count as usize);
    let mut masks = Vec::with_capacity(frame_count as usize);

    for t in 0..frame_count {
        let (active_obj, tau) = spec.active(t);

        // Current and next pose per object; inactive objects rest at their
        // start pose, so only the active one generates flow.
        let poses: Vec<Pose> = spec
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| if i == active_obj { o.pose(tau as f64, lf) } else { o.pose(0.0, lf) })
            .collect();
        let next_pose = spec.objects[active_obj].pose(tau as f64 + 1.0, lf);

        // Out-of-bounds check on the transformed bounding radius.
        for (i, (obj, pose)) in spec.objects.iter().zip(&poses).enumerate() {
            let r = obj.shape.bounding_radius() * pose.scale;
            if pose.pos.0 - r < 1.0
                || pose.pos.0 + r > w as f64
                || pose.pos.1 - r < 1.0
                || pose.pos.1 + r > h as f64
            {
                return Err(Error::validation(format!(
                    "object {} ({}) out of bounds at frame {t}",
                    i, obj.name
                )));
            }
        }

        let mut frame = Frame::<T>::zeros(w, h, spec.channels, t);
        let mut flow = FlowField::<T>::zeros(w, h);
        let mut mask = Mask::zeros(w, h);

        for y in 1..=h {
            for x in 1..=w {
                let p = Pixel::new(x, y);
                let q = (x as f64, y as f64);
                let mut rgb = background_color(&spec.background, p);
                for (i, (obj, pose)) in spec.objects.iter().zip(&poses).enumerate() {
                    let u = pose.to_local(q);
                    if !obj.shape.contains_local(u) {
                        continue;
                    }
                    if mask.get(p) != 0 {
                        return Err(Error::validation(format!(
                            "objects {} and {} overlap at frame {t}, pixel ({x}, {y})",
                            mask.get(p) - 1,
                            i
                        )));
                    }
                    mask.set(p, (i + 1) as u16);
                    rgb = fill_color(&obj.fill, u);
                    if i == active_obj {
                        let q_next = next_pose.to_frame(u);
                        // Quantize through f32: the .mot format stores f32.
                        let vx = (q_next.0 - q.0) as f32;
                        let vy = (q_next.1 - q.1) as f32;
                        flow.set(p, (c::<T>(vx as f64), c::<T>(vy as f64)));
                    }
                }
                match spec.channels {
                    1 => frame.set(p, 0, quantize(gray_level(rgb))),
                    _ => {
                        frame.set(p, 0, quantize(rgb[0]));
                        frame.set(p, 1, quantize(rgb[1]));
                        frame.set(p, 2, quantize(rgb[2]));
                    }
                }
            }
        }

        frames.push(frame);
        flows.push(flow);
        masks.push(mask);
    }

    Ok(StreamBundle { manifest, frames, flows, masks, supervisions: Vec::new() })
}

/// Centroid (1-based continuous coords) of a class's mask pixels, if any.
pub fn mask_centroid(mask: &Mask, class_id: u16) -> Option<(f64, f64)> {
    let mut count = 0u64;
    let (mut sx, mut sy) = (0f64, 0f64);
    for y in 1..=mask.h {
        for x in 1..=mask.w {
            if mask.get(Pixel::new(x, y)) == class_id {
                sx += x as f64;
                sy += y as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        None
    } else {
        Some((sx / count as f64, sy / count as f64))
    }
}
