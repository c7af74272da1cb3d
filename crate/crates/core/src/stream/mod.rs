//! Synthetic labeled video streams with exact optical flow, plus the
//! on-disk bundle layout (frames/motion/masks/sup + manifest).

pub mod bundle;
pub mod scene;

pub use bundle::{read_bundle, write_bundle};
pub use scene::{generate_stream, Background, Fill, ObjectSpec, SceneSpec, ShapeKind};

use crate::coords::Pixel;
use crate::error::{Error, Result};
use crate::num::{c, Real};

/// One video frame; pixel values in `[0, 1]`, planar `[c][h][w]` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T: Real> {
    pub w: u32,
    pub h: u32,
    pub channels: u8,
    pub index: u32,
    data: Vec<T>,
}

impl<T: Real> Frame<T> {
    pub fn new(w: u32, h: u32, channels: u8, index: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != (w as usize) * (h as usize) * channels as usize {
            return Err(Error::invalid(format!(
                "frame data length {} does not match {w}x{h}x{channels}",
                data.len()
            )));
        }
        Ok(Frame { w, h, channels, index, data })
    }

    pub fn zeros(w: u32, h: u32, channels: u8, index: u32) -> Self {
        Frame { w, h, channels, index, data: vec![T::zero(); (w * h) as usize * channels as usize] }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, p: Pixel, ch: usize) -> T {
        self.data[ch * (self.w * self.h) as usize + p.ravel(self.w)]
    }

    #[inline]
    pub fn set(&mut self, p: Pixel, ch: usize, v: T) {
        self.data[ch * (self.w * self.h) as usize + p.ravel(self.w)] = v;
    }

    /// Planar `[c, h, w]` tensor view for the feature extractor.
    pub fn to_tensor(&self) -> crate::grad::Tensor<T> {
        crate::grad::Tensor::new(
            vec![self.channels as usize, self.h as usize, self.w as usize],
            self.data.clone(),
        )
        .expect("frame dimensions are consistent")
    }
}

/// Scalar field over the frame grid (brightness, masses, inhibition).
#[derive(Debug, Clone, PartialEq)]
pub struct Field2<T: Real> {
    pub w: u32,
    pub h: u32,
    data: Vec<T>,
}

impl<T: Real> Field2<T> {
    pub fn zeros(w: u32, h: u32) -> Self {
        Field2 { w, h, data: vec![T::zero(); (w * h) as usize] }
    }

    pub fn from_vec(w: u32, h: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != (w * h) as usize {
            return Err(Error::invalid(format!("field length {} != {w}x{h}", data.len())));
        }
        Ok(Field2 { w, h, data })
    }

    #[inline]
    pub fn get(&self, p: Pixel) -> T {
        self.data[p.ravel(self.w)]
    }

    #[inline]
    pub fn get_mut(&mut self, p: Pixel) -> &mut T {
        &mut self.data[p.ravel(self.w)]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// Per-pixel 2D velocity in pixels/frame, `(vx, vy)` interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T: Real> {
    pub w: u32,
    pub h: u32,
    data: Vec<T>,
}

impl<T: Real> FlowField<T> {
    pub fn zeros(w: u32, h: u32) -> Self {
        FlowField { w, h, data: vec![T::zero(); (w * h) as usize * 2] }
    }

    pub fn from_vec(w: u32, h: u32, data: Vec<T>) -> Result<Self> {
        if data.len() != (w * h) as usize * 2 {
            return Err(Error::invalid(format!("flow length {} != {w}x{h}x2", data.len())));
        }
        Ok(FlowField { w, h, data })
    }

    #[inline]
    pub fn get(&self, p: Pixel) -> (T, T) {
        let i = p.ravel(self.w) * 2;
        (self.data[i], self.data[i + 1])
    }

    #[inline]
    pub fn set(&mut self, p: Pixel, v: (T, T)) {
        let i = p.ravel(self.w) * 2;
        self.data[i] = v.0;
        self.data[i + 1] = v.1;
    }

    #[inline]
    pub fn magnitude(&self, p: Pixel) -> T {
        let (vx, vy) = self.get(p);
        (vx * vx + vy * vy).sqrt()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

/// Ground-truth class-id mask; 0 is unknown/background.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub w: u32,
    pub h: u32,
    pub data: Vec<u16>,
}

impl Mask {
    pub fn zeros(w: u32, h: u32) -> Self {
        Mask { w, h, data: vec![0; (w * h) as usize] }
    }

    #[inline]
    pub fn get(&self, p: Pixel) -> u16 {
        self.data[p.ravel(self.w)]
    }

    #[inline]
    pub fn set(&mut self, p: Pixel, v: u16) {
        self.data[p.ravel(self.w)] = v;
    }
}

/// A single pixel-level supervision: frame, raveled pixel, class id (>= 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupervisionEvent {
    pub t: u32,
    pub index: u32,
    pub class_id: u16,
}

/// Per-object lap windows, `(start_frame, end_frame)` inclusive.
pub type LapRanges = Vec<(u32, u32)>;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamManifest {
    pub w: u32,
    pub h: u32,
    pub channels: u8,
    pub frame_count: u32,
    /// Index 0 is reserved for "unknown"; object class ids start at 1.
    pub class_names: Vec<String>,
    /// `laps[i]` are the windows of the object with class id `i + 1`.
    pub laps: Vec<LapRanges>,
    pub seed: u64,
}

impl StreamManifest {
    /// Number of target objects (`n`); total categories are `n + 1`.
    pub fn object_count(&self) -> usize {
        self.class_names.len() - 1
    }

    pub fn num_categories(&self) -> usize {
        self.class_names.len()
    }

    /// The object (0-based) active at frame `t` and its lap index, if any.
    pub fn active_object(&self, t: u32) -> Option<(usize, usize)> {
        for (obj, ranges) in self.laps.iter().enumerate() {
            for (lap, &(start, end)) in ranges.iter().enumerate() {
                if t >= start && t <= end {
                    return Some((obj, lap));
                }
            }
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() || self.class_names[0] != "unknown" {
            return Err(Error::validation("class_names[0] must be \"unknown\""));
        }
        if self.laps.len() + 1 != self.class_names.len() {
            return Err(Error::validation(format!(
                "{} lap lists for {} object classes",
                self.laps.len(),
                self.class_names.len() - 1
            )));
        }
        let mut all: Vec<(u32, u32)> = Vec::new();
        for ranges in &self.laps {
            for &(s, e) in ranges {
                if s > e || e >= self.frame_count {
                    return Err(Error::validation(format!(
                        "lap range {s}-{e} outside stream of {} frames",
                        self.frame_count
                    )));
                }
                all.push((s, e));
            }
        }
        all.sort_unstable();
        for pair in all.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(Error::validation(format!(
                    "overlapping lap ranges {:?} and {:?}: objects move one at a time",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }
}

/// A full stream: frames, exact flow, ground-truth masks, supervision
/// schedule, manifest. Immutable once generated.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBundle<T: Real> {
    pub manifest: StreamManifest,
    pub frames: Vec<Frame<T>>,
    pub flows: Vec<FlowField<T>>,
    pub masks: Vec<Mask>,
    pub supervisions: Vec<SupervisionEvent>,
}

/// Scalar brightness of a frame: identity for single-channel frames,
/// Rec.601 luma (0.299 R + 0.587 G + 0.114 B) for RGB.
pub fn brightness<T: Real>(frame: &Frame<T>) -> Field2<T> {
    let plane = (frame.w * frame.h) as usize;
    let mut out = Field2::zeros(frame.w, frame.h);
    match frame.channels {
        1 => out.data_mut().copy_from_slice(&frame.data()[..plane]),
        _ => {
            let (wr, wg, wb) = (c::<T>(0.299), c::<T>(0.587), c::<T>(0.114));
            let d = frame.data();
            for i in 0..plane {
                out.data_mut()[i] = wr * d[i] + wg * d[plane + i] + wb * d[2 * plane + i];
            }
        }
    }
    out
}
