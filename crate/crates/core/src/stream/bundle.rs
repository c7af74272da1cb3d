//! On-disk stream bundle, bit-exact round trip:
//!
//! ```text
//! manifest.txt                      key=value lines
//! frames/dddddd00/frame_%06d.png    lossless PNG, groups of 100 frames
//! motion/dddddd00/motion_%06d.mot   "MOT1", u32 LE w, u32 LE h, h*w*2 f32 LE
//! masks/dddddd00/mask_%06d.msk      "MSK1", u32 LE w, u32 LE h, h*w u16 LE
//! sup/sup.csv                       lines "t,raveled_index,class_id"
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::num::{c, Real};

use super::{FlowField, Frame, Mask, StreamBundle, StreamManifest, SupervisionEvent};

const MOT_MAGIC: &[u8; 4] = b"MOT1";
const MSK_MAGIC: &[u8; 4] = b"MSK1";

fn group_dir(t: u32) -> String {
    format!("{:08}", (t / 100) * 100)
}

fn frame_path(root: &Path, t: u32) -> PathBuf {
    root.join("frames").join(group_dir(t)).join(format!("frame_{t:06}.png"))
}

fn motion_path(root: &Path, t: u32) -> PathBuf {
    root.join("motion").join(group_dir(t)).join(format!("motion_{t:06}.mot"))
}

fn mask_path(root: &Path, t: u32) -> PathBuf {
    root.join("masks").join(group_dir(t)).join(format!("mask_{t:06}.msk"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn manifest_text(m: &StreamManifest) -> String {
    // Lap windows serialized chronologically as class:start-end.
    let mut windows: Vec<(u32, u32, usize)> = Vec::new();
    for (obj, ranges) in m.laps.iter().enumerate() {
        for &(s, e) in ranges {
            windows.push((s, e, obj + 1));
        }
    }
    windows.sort_unstable();
    let laps = windows
        .iter()
        .map(|(s, e, class)| format!("{class}:{s}-{e}"))
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "w={}\nh={}\nc={}\nframes={}\nclasses={}\nseed={}\nlaps={}\n",
        m.w,
        m.h,
        m.channels,
        m.frame_count,
        m.class_names.join(","),
        m.seed,
        laps
    )
}

fn parse_manifest(path: &Path, text: &str) -> Result<StreamManifest> {
    let mut w = None;
    let mut h = None;
    let mut channels = None;
    let mut frames = None;
    let mut classes: Option<Vec<String>> = None;
    let mut seed = None;
    let mut laps_raw = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: missing '='", lineno + 1)))?;
        match key {
            "w" => w = Some(parse_num(path, key, value)?),
            "h" => h = Some(parse_num(path, key, value)?),
            "c" => channels = Some(parse_num::<u8>(path, key, value)?),
            "frames" => frames = Some(parse_num(path, key, value)?),
            "classes" => classes = Some(value.split(',').map(str::to_string).collect()),
            "seed" => seed = Some(parse_num(path, key, value)?),
            "laps" => laps_raw = Some(value.to_string()),
            other => return Err(Error::format(path, format!("unknown manifest key {other:?}"))),
        }
    }

    let class_names = classes.ok_or_else(|| Error::format(path, "missing classes"))?;
    let n = class_names.len().saturating_sub(1);
    let mut laps = vec![Vec::new(); n];
    let laps_raw = laps_raw.ok_or_else(|| Error::format(path, "missing laps"))?;
    if !laps_raw.is_empty() {
        for item in laps_raw.split(';') {
            let (class, range) = item
                .split_once(':')
                .ok_or_else(|| Error::format(path, format!("bad lap item {item:?}")))?;
            let (s, e) = range
                .split_once('-')
                .ok_or_else(|| Error::format(path, format!("bad lap range {range:?}")))?;
            let class: usize = parse_num(path, "laps", class)?;
            if class == 0 || class > n {
                return Err(Error::format(path, format!("lap class {class} out of range")));
            }
            laps[class - 1].push((parse_num(path, "laps", s)?, parse_num(path, "laps", e)?));
        }
    }

    let manifest = StreamManifest {
        w: w.ok_or_else(|| Error::format(path, "missing w"))?,
        h: h.ok_or_else(|| Error::format(path, "missing h"))?,
        channels: channels.ok_or_else(|| Error::format(path, "missing c"))?,
        frame_count: frames.ok_or_else(|| Error::format(path, "missing frames"))?,
        class_names,
        laps,
        seed: seed.ok_or_else(|| Error::format(path, "missing seed"))?,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn parse_num<N: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<N> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::format(path, format!("key {key}: bad number {value:?}")))
}

fn write_frame_png<T: Real>(path: &Path, frame: &Frame<T>) -> Result<()> {
    create_parent(path)?;
    let plane = (frame.w * frame.h) as usize;
    let to_byte = |v: T| -> u8 {
        let x = v.to_f64_lossy() * 255.0;
        x.round().clamp(0.0, 255.0) as u8
    };
    let (buf, color) = match frame.channels {
        1 => (frame.data().iter().map(|&v| to_byte(v)).collect::<Vec<u8>>(), image::ColorType::L8),
        _ => {
            let d = frame.data();
            let mut buf = Vec::with_capacity(plane * 3);
            for i in 0..plane {
                buf.push(to_byte(d[i]));
                buf.push(to_byte(d[plane + i]));
                buf.push(to_byte(d[2 * plane + i]));
            }
            (buf, image::ColorType::Rgb8)
        }
    };
    image::save_buffer(path, &buf, frame.w, frame.h, color)
        .map_err(|e| Error::format(path, format!("png encode: {e}")))
}

fn read_frame_png<T: Real>(path: &Path, w: u32, h: u32, channels: u8, t: u32) -> Result<Frame<T>> {
    let img = image::open(path).map_err(|e| Error::format(path, format!("png decode: {e}")))?;
    let plane = (w * h) as usize;
    let from_byte = |b: u8| c::<T>(b as f64 / 255.0);
    let data = match channels {
        1 => {
            let gray = img.to_luma8();
            if gray.dimensions() != (w, h) {
                return Err(Error::format(path, format!("expected {w}x{h}, got {:?}", gray.dimensions())));
            }
            gray.into_raw().into_iter().map(from_byte).collect()
        }
        _ => {
            let rgb = img.to_rgb8();
            if rgb.dimensions() != (w, h) {
                return Err(Error::format(path, format!("expected {w}x{h}, got {:?}", rgb.dimensions())));
            }
            let raw = rgb.into_raw();
            let mut data = vec![T::zero(); plane * 3];
            for i in 0..plane {
                data[i] = from_byte(raw[3 * i]);
                data[plane + i] = from_byte(raw[3 * i + 1]);
                data[2 * plane + i] = from_byte(raw[3 * i + 2]);
            }
            data
        }
    };
    Frame::new(w, h, channels, t, data)
}

fn write_motion<T: Real>(path: &Path, flow: &FlowField<T>) -> Result<()> {
    create_parent(path)?;
    let mut buf = Vec::with_capacity(12 + flow.data().len() * 4);
    buf.extend_from_slice(MOT_MAGIC);
    buf.extend_from_slice(&flow.w.to_le_bytes());
    buf.extend_from_slice(&flow.h.to_le_bytes());
    for &v in flow.data() {
        buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_motion<T: Real>(path: &Path, w: u32, h: u32) -> Result<FlowField<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 12 + (w * h) as usize * 2 * 4;
    if bytes.len() < 4 || &bytes[..4] != MOT_MAGIC {
        return Err(Error::format(path, "bad magic, want MOT1"));
    }
    if bytes.len() != expected {
        return Err(Error::format(path, format!("truncated: {} bytes, want {expected}", bytes.len())));
    }
    let fw = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let fh = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if (fw, fh) != (w, h) {
        return Err(Error::format(path, format!("size {fw}x{fh} does not match manifest {w}x{h}")));
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|chunk| c::<T>(f32::from_le_bytes(chunk.try_into().unwrap()) as f64))
        .collect();
    FlowField::from_vec(w, h, data)
}

/// Writes a class-id mask in the MSK1 format (also used for prediction
/// overlays).
pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    create_parent(path)?;
    let mut buf = Vec::with_capacity(12 + mask.data.len() * 2);
    buf.extend_from_slice(MSK_MAGIC);
    buf.extend_from_slice(&mask.w.to_le_bytes());
    buf.extend_from_slice(&mask.h.to_le_bytes());
    for &v in &mask.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: &Path, w: u32, h: u32) -> Result<Mask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = 12 + (w * h) as usize * 2;
    if bytes.len() < 4 || &bytes[..4] != MSK_MAGIC {
        return Err(Error::format(path, "bad magic, want MSK1"));
    }
    if bytes.len() != expected {
        return Err(Error::format(path, format!("truncated: {} bytes, want {expected}", bytes.len())));
    }
    let mw = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let mh = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if (mw, mh) != (w, h) {
        return Err(Error::format(path, format!("size {mw}x{mh} does not match manifest {w}x{h}")));
    }
    let data = bytes[12..]
        .chunks_exact(2)
        .map(|chunk| u16::from_le_bytes(chunk.try_into().unwrap()))
        .collect();
    Ok(Mask { w, h, data })
}

/// Serializes supervision events as "t,raveled_index,class_id" lines.
pub fn write_supervisions(path: &Path, events: &[SupervisionEvent]) -> Result<()> {
    create_parent(path)?;
    let mut out = String::new();
    for ev in events {
        out.push_str(&format!("{},{},{}\n", ev.t, ev.index, ev.class_id));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_supervisions(path: &Path, m: &StreamManifest) -> Result<Vec<SupervisionEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(path, format!("line {}: want t,index,class", lineno + 1)));
        }
        let ev = SupervisionEvent {
            t: parse_num(path, "t", parts[0])?,
            index: parse_num(path, "index", parts[1])?,
            class_id: parse_num(path, "class_id", parts[2])?,
        };
        if ev.index >= m.w * m.h {
            return Err(Error::format(
                path,
                format!("line {}: index {} >= {}", lineno + 1, ev.index, m.w * m.h),
            ));
        }
        if ev.class_id == 0 || ev.class_id as usize >= m.num_categories() {
            return Err(Error::format(path, format!("line {}: bad class {}", lineno + 1, ev.class_id)));
        }
        if ev.t >= m.frame_count {
            return Err(Error::format(path, format!("line {}: frame {} out of range", lineno + 1, ev.t)));
        }
        events.push(ev);
    }
    Ok(events)
}

pub fn write_bundle<T: Real>(bundle: &StreamBundle<T>, dir: &Path) -> Result<()> {
    bundle.manifest.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.txt");
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    f.write_all(manifest_text(&bundle.manifest).as_bytes())
        .map_err(|e| Error::io(&manifest_path, e))?;

    for (t, frame) in bundle.frames.iter().enumerate() {
        write_frame_png(&frame_path(dir, t as u32), frame)?;
    }
    for (t, flow) in bundle.flows.iter().enumerate() {
        write_motion(&motion_path(dir, t as u32), flow)?;
    }
    for (t, mask) in bundle.masks.iter().enumerate() {
        write_mask(&mask_path(dir, t as u32), mask)?;
    }
    write_supervisions(&dir.join("sup").join("sup.csv"), &bundle.supervisions)
}

pub fn read_bundle<T: Real>(dir: &Path) -> Result<StreamBundle<T>> {
    let manifest_path = dir.join("manifest.txt");
    let mut text = String::new();
    fs::File::open(&manifest_path)
        .map_err(|e| Error::io(&manifest_path, e))?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(&manifest_path, e))?;
    let manifest = parse_manifest(&manifest_path, &text)?;

    let (w, h, ch) = (manifest.w, manifest.h, manifest.channels);
    let mut frames = Vec::with_capacity(manifest.frame_count as usize);
    let mut flows = Vec::with_capacity(manifest.frame_count as usize);
    let mut masks = Vec::with_capacity(manifest.frame_count as usize);
    for t in 0..manifest.frame_count {
        frames.push(read_frame_png(&frame_path(dir, t), w, h, ch, t)?);
        flows.push(read_motion(&motion_path(dir, t), w, h)?);
        masks.push(read_mask(&mask_path(dir, t), w, h)?);
    }
    let supervisions = read_supervisions(&dir.join("sup").join("sup.csv"), &manifest)?;
    Ok(StreamBundle { manifest, frames, flows, masks, supervisions })
}

#[cfg(test)]
mod tests {
    use super::super::scene::{Background, Fill, ObjectSpec, SceneSpec, ShapeKind};
    use super::super::generate_stream;
    use super::*;

    fn tiny_scene() -> SceneSpec {
        SceneSpec {
            width: 8,
            height: 8,
            channels: 3,
            background: Background::Uniform([30, 30, 30]),
            objects: vec![ObjectSpec {
                name: "dot".into(),
                shape: ShapeKind::Circle { radius: 1.4 },
                fill: Fill::Solid([200, 40, 40]),
                orbit_center: (4.5, 4.5),
                orbit_radius: (1.0, 1.0),
                orbit_phase: 0.0,
                spin_turns: 0,
                scale_amp: 0.0,
            }],
            laps_total: 1,
            lap_frames: 3,
        }
    }

    #[test]
    fn bundle_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = generate_stream::<f64>(&tiny_scene(), 11).unwrap();
        bundle.supervisions.push(SupervisionEvent { t: 1, index: 20, class_id: 1 });
        write_bundle(&bundle, dir.path()).unwrap();
        let back = read_bundle::<f64>(dir.path()).unwrap();
        assert_eq!(bundle, back);

        // Writing the read-back bundle reproduces identical bytes.
        let dir2 = tempfile::tempdir().unwrap();
        write_bundle(&back, dir2.path()).unwrap();
        for entry in walk(dir.path()) {
            let rel = entry.strip_prefix(dir.path()).unwrap();
            let a = fs::read(&entry).unwrap();
            let b = fs::read(dir2.path().join(rel)).unwrap();
            assert_eq!(a, b, "mismatch in {rel:?}");
        }
    }

    fn walk(root: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    out.push(path);
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn corrupted_motion_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = generate_stream::<f64>(&tiny_scene(), 11).unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        let victim = motion_path(dir.path(), 0);
        let mut bytes = fs::read(&victim).unwrap();
        bytes[0] = b'X';
        fs::write(&victim, bytes).unwrap();
        let err = read_bundle::<f64>(dir.path()).unwrap_err().to_string();
        assert!(err.contains("MOT1"), "{err}");
    }

    #[test]
    fn oversized_supervision_index_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = generate_stream::<f64>(&tiny_scene(), 11).unwrap();
        bundle.supervisions.push(SupervisionEvent { t: 0, index: 63, class_id: 1 });
        write_bundle(&bundle, dir.path()).unwrap();
        let sup = dir.path().join("sup").join("sup.csv");
        fs::write(&sup, "0,64,1\n").unwrap();
        let err = read_bundle::<f64>(dir.path()).unwrap_err().to_string();
        assert!(err.contains("64"), "{err}");
    }

    #[test]
    fn truncated_mask_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = generate_stream::<f64>(&tiny_scene(), 11).unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        let victim = mask_path(dir.path(), 1);
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_bundle::<f64>(dir.path()).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn subfolders_group_frames_by_hundred() {
        assert_eq!(group_dir(0), "00000000");
        assert_eq!(group_dir(99), "00000000");
        assert_eq!(group_dir(100), "00000100");
        assert_eq!(group_dir(12345), "00012300");
    }
}
