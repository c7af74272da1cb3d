//! Simulated focus-of-attention trajectory: brightness-gradient and motion
//! masses generate a logarithmic-potential field, and the gaze is a damped
//! point particle falling through it. Fast relocations are flagged as
//! saccades by thresholding the speed.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::coords::Pixel;
use crate::error::{Error, Result};
use crate::num::{c, Real};
use crate::stream::{brightness, Field2, FlowField, Frame};

/// Gaze state after one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionState<T: Real> {
    /// Position in continuous 1-based pixel coordinates, clamped to the frame.
    pub pos: (T, T),
    /// Velocity in pixels/step.
    pub vel: (T, T),
    pub saccade: bool,
}

impl<T: Real> AttentionState<T> {
    pub fn at(pos: (T, T)) -> Self {
        AttentionState { pos, vel: (T::zero(), T::zero()), saccade: false }
    }

    /// Nearest pixel to the continuous position.
    pub fn pixel(&self, w: u32, h: u32) -> Pixel {
        let x = self.pos.0.to_f64_lossy().round().clamp(1.0, w as f64) as u32;
        let y = self.pos.1.to_f64_lossy().round().clamp(1.0, h as f64) as u32;
        Pixel::new(x, y)
    }

    pub fn speed(&self) -> T {
        (self.vel.0 * self.vel.0 + self.vel.1 * self.vel.1).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T: Real> {
    /// Weight of the brightness-gradient mass.
    pub alpha_b: T,
    /// Weight of the motion-magnitude mass.
    pub alpha_m: T,
    /// Dissipation (> 0).
    pub rho: T,
    /// Saccade speed threshold (> 0).
    pub nu: T,
    /// Integration step (> 0), in frames.
    pub dt: T,
    /// Inhibition-of-return deposit strength (0 disables the mechanism).
    pub inhib_strength: T,
    /// Deposit radius in pixels.
    pub inhib_radius: T,
    /// Per-frame geometric decay of the inhibition field, in [0, 1).
    pub inhib_decay: T,
    /// Floor on squared distances in the potential gradient (px^2).
    pub eps_phi: T,
}

impl<T: Real> Default for AttentionParams<T> {
    fn default() -> Self {
        AttentionParams {
            alpha_b: c(0.2),
            alpha_m: T::one(),
            rho: c(0.4),
            nu: c(4.0),
            dt: T::one(),
            inhib_strength: T::zero(),
            inhib_radius: c(3.0),
            inhib_decay: c(0.9),
            eps_phi: c(0.25),
        }
    }
}

impl<T: Real> AttentionParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha_b >= T::zero()
            && self.alpha_m >= T::zero()
            && self.rho > T::zero()
            && self.nu > T::zero()
            && self.dt > T::zero()
            && self.inhib_strength >= T::zero()
            && self.inhib_decay >= T::zero()
            && self.inhib_decay < T::one()
            && self.eps_phi > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("attention params out of range"))
        }
    }
}

/// Nonnegative attention mass field.
pub type MassField<T> = Field2<T>;

/// mu = alpha_b * |grad brightness| + alpha_m * ||v|| - inhibition, clamped
/// at zero. The brightness gradient uses central differences (one-sided at
/// the borders).
pub fn compute_masses<T: Real>(
    frame: &Frame<T>,
    flow: &FlowField<T>,
    inhibition: &Field2<T>,
    params: &AttentionParams<T>,
) -> MassField<T> {
    let (w, h) = (frame.w, frame.h);
    let bright = brightness(frame);
    let mut out = Field2::zeros(w, h);
    let half = c::<T>(0.5);
    for y in 1..=h {
        for x in 1..=w {
            let p = Pixel::new(x, y);
            let sample = |xx: u32, yy: u32| bright.get(Pixel::new(xx, yy));
            let gx = if x == 1 {
                sample(2, y) - sample(1, y)
            } else if x == w {
                sample(w, y) - sample(w - 1, y)
            } else {
                (sample(x + 1, y) - sample(x - 1, y)) * half
            };
            let gy = if y == 1 {
                sample(x, 2) - sample(x, 1)
            } else if y == h {
                sample(x, h) - sample(x, h - 1)
            } else {
                (sample(x, y + 1) - sample(x, y - 1)) * half
            };
            let grad_mag = (gx * gx + gy * gy).sqrt();
            let mu = params.alpha_b * grad_mag + params.alpha_m * flow.magnitude(p)
                - inhibition.get(p);
            *out.get_mut(p) = mu.max(T::zero());
        }
    }
    out
}

/// Discretized gradient of the logarithmic gravitational potential at `x`:
/// `-(2 pi)^-1 sum_z mu(z) (x - z) / max(||x - z||^2, eps_phi)`, summed over
/// pixel centers. Attractive: points toward mass.
pub fn potential_gradient<T: Real>(masses: &MassField<T>, x: (T, T), eps_phi: T) -> (T, T) {
    let inv_2pi = c::<T>(-1.0 / TAU);
    let mut gx = T::zero();
    let mut gy = T::zero();
    let data = masses.data();
    let w = masses.w as usize;
    for (i, &mu) in data.iter().enumerate() {
        if mu == T::zero() {
            continue;
        }
        let zx = c::<T>((i % w) as f64 + 1.0);
        let zy = c::<T>((i / w) as f64 + 1.0);
        let dx = x.0 - zx;
        let dy = x.1 - zy;
        let denom = (dx * dx + dy * dy).max(eps_phi);
        gx = gx + mu * dx / denom;
        gy = gy + mu * dy / denom;
    }
    (inv_2pi * gx, inv_2pi * gy)
}

/// One semi-implicit Euler step of `a'' + rho a' + grad phi(a) = 0`:
/// velocity first, then position, then border clamping (zeroing the normal
/// velocity component on contact) and the saccade test `||a'|| > nu`.
pub fn step_attention<T: Real>(
    state: &AttentionState<T>,
    masses: &MassField<T>,
    params: &AttentionParams<T>,
) -> Result<AttentionState<T>> {
    let grad = potential_gradient(masses, state.pos, params.eps_phi);
    let acc = (-params.rho * state.vel.0 - grad.0, -params.rho * state.vel.1 - grad.1);
    let mut vel = (state.vel.0 + params.dt * acc.0, state.vel.1 + params.dt * acc.1);
    let mut pos = (state.pos.0 + params.dt * vel.0, state.pos.1 + params.dt * vel.1);

    let (w, h) = (c::<T>(masses.w as f64), c::<T>(masses.h as f64));
    if pos.0 < T::one() {
        pos.0 = T::one();
        vel.0 = T::zero();
    } else if pos.0 > w {
        pos.0 = w;
        vel.0 = T::zero();
    }
    if pos.1 < T::one() {
        pos.1 = T::one();
        vel.1 = T::zero();
    } else if pos.1 > h {
        pos.1 = h;
        vel.1 = T::zero();
    }

    let next = AttentionState {
        pos,
        vel,
        saccade: (vel.0 * vel.0 + vel.1 * vel.1).sqrt() > params.nu,
    };
    if !(next.pos.0.is_finite() && next.pos.1.is_finite() && next.vel.0.is_finite() && next.vel.1.is_finite()) {
        return Err(Error::NonFinite { context: "attention state".into() });
    }
    Ok(next)
}

/// Owns the gaze state plus the inhibition-of-return field and advances both
/// one frame at a time.
#[derive(Debug, Clone)]
pub struct AttentionSim<T: Real> {
    pub params: AttentionParams<T>,
    pub state: AttentionState<T>,
    inhibition: Field2<T>,
}

impl<T: Real> AttentionSim<T> {
    pub fn new(params: AttentionParams<T>, initial: AttentionState<T>, w: u32, h: u32) -> Result<Self> {
        params.validate()?;
        Ok(AttentionSim { params, state: initial, inhibition: Field2::zeros(w, h) })
    }

    /// Centered start with zero velocity.
    pub fn centered(params: AttentionParams<T>, w: u32, h: u32) -> Result<Self> {
        let pos = (c::<T>((w as f64 + 1.0) / 2.0), c::<T>((h as f64 + 1.0) / 2.0));
        Self::new(params, AttentionState::at(pos), w, h)
    }

    pub fn inhibition(&self) -> &Field2<T> {
        &self.inhibition
    }

    /// Advances one frame: mass field, dynamics step, inhibition update.
    pub fn step(&mut self, frame: &Frame<T>, flow: &FlowField<T>) -> Result<AttentionState<T>> {
        let masses = compute_masses(frame, flow, &self.inhibition, &self.params);
        self.state = step_attention(&self.state, &masses, &self.params)?;

        if self.params.inhib_strength > T::zero() {
            for v in self.inhibition.data_mut() {
                *v = *v * self.params.inhib_decay;
            }
            let (w, h) = (frame.w, frame.h);
            let center = self.state.pos;
            let r = self.params.inhib_radius;
            let r2 = r * r;
            let span = r.to_f64_lossy().ceil() as i64;
            let (cx, cy) = (center.0.to_f64_lossy().round() as i64, center.1.to_f64_lossy().round() as i64);
            for dy in -span..=span {
                for dx in -span..=span {
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 1 || x > w as i64 || y < 1 || y > h as i64 {
                        continue;
                    }
                    let ddx = c::<T>(x as f64) - center.0;
                    let ddy = c::<T>(y as f64) - center.1;
                    if ddx * ddx + ddy * ddy <= r2 {
                        let p = Pixel::new(x as u32, y as u32);
                        *self.inhibition.get_mut(p) = self.inhibition.get(p) + self.params.inhib_strength;
                    }
                }
            }
        }
        Ok(self.state)
    }
}

/// Writes a trajectory in the `.foa` CSV layout: header then one
/// `foa_x,foa_y,v_x,v_y,saccade` line per frame. Floats use shortest
/// exact formatting, so a read-back is bit-identical.
pub fn write_foa<T: Real>(trajectory: &[AttentionState<T>], path: &Path) -> Result<()> {
    for (i, s) in trajectory.iter().enumerate() {
        if !(s.pos.0.is_finite() && s.pos.1.is_finite() && s.vel.0.is_finite() && s.vel.1.is_finite()) {
            return Err(Error::NonFinite { context: format!("trajectory entry {i}") });
        }
    }
    let mut out = String::from("foa_x,foa_y,v_x,v_y,saccade\n");
    for s in trajectory {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.pos.0,
            s.pos.1,
            s.vel.0,
            s.vel.1,
            u8::from(s.saccade)
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_foa<T: Real>(path: &Path) -> Result<Vec<AttentionState<T>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 && line.starts_with("foa_x") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::format(path, format!("line {}: want 5 fields", lineno + 1)));
        }
        let num = |s: &str| -> Result<T> {
            s.parse::<T>()
                .map_err(|_| Error::format(path, format!("line {}: bad float {s:?}", lineno + 1)))
        };
        let saccade = match fields[4] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::format(path, format!("line {}: bad saccade {other:?}", lineno + 1)))
            }
        };
        out.push(AttentionState {
            pos: (num(fields[0])?, num(fields[1])?),
            vel: (num(fields[2])?, num(fields[3])?),
            saccade,
        });
    }
    Ok(out)
}
