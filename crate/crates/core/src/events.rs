//! Contrast-threshold event camera simulation over high-rate rendered frames.
//!
//! Each pixel keeps a reference log brightness. The log signal is linearly
//! interpolated between frame samples; every time it departs from the
//! reference by the contrast threshold an event is emitted at the
//! interpolated crossing time and the reference moves by exactly one
//! threshold step toward the signal. During the refractory window after an
//! emission the pixel is blind: a crossing inside the window is dropped
//! without touching the reference, and at window expiry the pixel fires
//! immediately if the threshold condition still holds (timestamped at the
//! expiry). A saturated ramp therefore produces events spaced exactly one
//! refractory period apart.

use crate::error::{Error, Result};

/// One brightness-change event. Polarity is +1 for brightening, -1 for
/// darkening.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: i8,
}

/// Time-sorted event stream with sensor geometry. Ties are ordered by
/// (t, y, x, p) so streams are canonical and byte-stable.
#[derive(Clone, Debug, Default)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn sort_canonical(&mut self) {
        self.events
            .sort_unstable_by_key(|e| (e.t_us, e.y, e.x, e.polarity));
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<(u64, u16, u16, i8)> = None;
        for e in &self.events {
            if e.x >= self.width || e.y >= self.height {
                return Err(Error::invalid_data(format!(
                    "event at ({}, {}) outside sensor {}x{}",
                    e.x, e.y, self.width, self.height
                )));
            }
            if e.polarity != 1 && e.polarity != -1 {
                return Err(Error::invalid_data(format!("polarity {}", e.polarity)));
            }
            let key = (e.t_us, e.y, e.x, e.polarity);
            if let Some(p) = prev {
                if key < p {
                    return Err(Error::invalid_data("event stream not canonically sorted"));
                }
            }
            prev = Some(key);
        }
        Ok(())
    }
}

/// Ordered intensity frames in [0, 1] at microsecond timestamps.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    pub width: usize,
    pub height: usize,
    /// (timestamp µs, row-major intensity image)
    pub frames: Vec<(u64, Vec<f32>)>,
}

impl FrameSequence {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::invalid_data("frame sequence is empty"));
        }
        let len = self.width * self.height;
        let mut prev_t: Option<u64> = None;
        for (t, img) in &self.frames {
            if img.len() != len {
                return Err(Error::invalid_data(format!(
                    "frame has {} pixels, expected {len}",
                    img.len()
                )));
            }
            if let Some(p) = prev_t {
                if *t <= p {
                    return Err(Error::invalid_data(format!(
                        "non-monotone frame timestamps: {p} then {t}"
                    )));
                }
            }
            if img.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid_data("intensities must be finite and >= 0"));
            }
            prev_t = Some(*t);
        }
        Ok(())
    }
}

/// Simulator parameters. The seed drives per-sequence threshold sampling in
/// the data pipeline; the simulation itself is deterministic.
#[derive(Clone, Copy, Debug)]
pub struct SimulatorConfig {
    /// Contrast threshold in log-intensity units.
    pub contrast_threshold: f64,
    /// Minimum time between two events at the same pixel.
    pub refractory_us: u64,
    /// Floor added before the log so zero intensity stays finite.
    pub log_eps: f64,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            contrast_threshold: 0.2,
            refractory_us: 100,
            log_eps: 1e-3,
            seed: 0,
        }
    }
}

/// Draw a per-sequence contrast threshold uniformly from `[lo, hi]`.
pub fn sample_threshold(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> f64 {
    assert!(lo > 0.0 && hi >= lo, "threshold range must be positive");
    if lo == hi {
        return lo;
    }
    rng.random_range(lo..=hi)
}

struct PixelState {
    ref_l: f64,
    last_emit_us: Option<f64>,
}

/// Generate the event stream for a frame sequence.
pub fn simulate_events(seq: &FrameSequence, cfg: &SimulatorConfig) -> Result<EventStream> {
    seq.validate()?;
    if seq.frames.len() < 2 {
        return Err(Error::invalid_data(
            "need at least two frames to simulate events",
        ));
    }
    if cfg.contrast_threshold <= 0.0 {
        return Err(Error::invalid_argument("contrast threshold must be > 0"));
    }
    if seq.width > u16::MAX as usize || seq.height > u16::MAX as usize {
        return Err(Error::invalid_argument("sensor larger than u16 coordinates"));
    }
    let c = cfg.contrast_threshold;
    let rho = cfg.refractory_us as f64;
    let eps = cfg.log_eps;
    let (w, h) = (seq.width, seq.height);
    let mut out = Vec::new();

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            let mut t_prev = seq.frames[0].0 as f64;
            let mut l_prev = (seq.frames[0].1[idx] as f64 + eps).ln();
            let mut st = PixelState {
                ref_l: l_prev,
                last_emit_us: None,
            };
            for (t_b, img) in &seq.frames[1..] {
                let t_b = *t_b as f64;
                let l_b = (img[idx] as f64 + eps).ln();
                emit_segment(&mut st, t_prev, l_prev, t_b, l_b, c, rho, |t, p| {
                    out.push(Event {
                        t_us: t.round() as u64,
                        x: x as u16,
                        y: y as u16,
                        polarity: p,
                    });
                });
                t_prev = t_b;
                l_prev = l_b;
            }
        }
    }

    let mut stream = EventStream {
        width: w as u16,
        height: h as u16,
        events: out,
    };
    stream.sort_canonical();
    Ok(stream)
}

/// Process one linear log-brightness segment (t_a, t_b] for one pixel.
fn emit_segment(
    st: &mut PixelState,
    t_a: f64,
    l_a: f64,
    t_b: f64,
    l_b: f64,
    c: f64,
    rho: f64,
    mut emit: impl FnMut(f64, i8),
) {
    let slope = (l_b - l_a) / (t_b - t_a);
    let mut cursor_t = t_a;
    loop {
        // Jump over the blind window, firing at expiry when still past
        // threshold.
        if let Some(le) = st.last_emit_us {
            let blind_until = le + rho;
            if cursor_t < blind_until {
                if blind_until > t_b {
                    return;
                }
                cursor_t = blind_until;
                let l_here = l_a + slope * (cursor_t - t_a);
                let dev = l_here - st.ref_l;
                if dev.abs() >= c {
                    let p: i8 = if dev > 0.0 { 1 } else { -1 };
                    emit(cursor_t, p);
                    st.ref_l += p as f64 * c;
                    st.last_emit_us = Some(cursor_t);
                    continue;
                }
            }
        }
        if slope == 0.0 {
            return;
        }
        let (target, p): (f64, i8) = if slope > 0.0 {
            (st.ref_l + c, 1)
        } else {
            (st.ref_l - c, -1)
        };
        // Crossing time by extrapolation. Half a microsecond of slack at the
        // segment end absorbs the f32 intensity quantization without moving
        // any emission by more than the 1 µs timestamp resolution.
        let t_star_raw = t_a + (target - l_a) / slope;
        if t_star_raw > t_b + 0.5 {
            return;
        }
        let t_star = t_star_raw.clamp(cursor_t, t_b);
        emit(t_star, p);
        st.ref_l += p as f64 * c;
        st.last_emit_us = Some(t_star);
        cursor_t = t_star;
    }
}
