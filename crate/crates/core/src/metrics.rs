//! Path straightness and tangential-speed profile statistics.
//!
//! Conventions: motion onset and offset are the first and last samples
//! whose speed exceeds 5% of the peak. A flat maximum is resolved to the
//! midpoint of the plateau. Speed maxima are counted only when both their
//! height and their prominence reach 10% of the peak.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::SimTrace;

pub const ONSET_FRACTION: f64 = 0.05;
pub const PEAK_FLOOR_FRACTION: f64 = 0.10;
const PLATEAU_RTOL: f64 = 1e-9;
const MIN_CHORD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionMetrics {
    pub path_length: f64,
    pub chord_length: f64,
    pub max_lateral_deviation: f64,
    pub straightness_ratio: f64,
    pub peak_speed: f64,
    pub t_peak_fraction: f64,
    pub symmetry_index: f64,
    pub n_speed_peaks: usize,
}

impl MotionMetrics {
    pub const FIELDS: [&'static str; 8] = [
        "path_length",
        "chord_length",
        "max_lateral_deviation",
        "straightness_ratio",
        "peak_speed",
        "t_peak_fraction",
        "symmetry_index",
        "n_speed_peaks",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.path_length,
            self.chord_length,
            self.max_lateral_deviation,
            self.straightness_ratio,
            self.peak_speed,
            self.t_peak_fraction,
            self.symmetry_index,
            self.n_speed_peaks as f64,
        ]
    }
}

/// Time-stamped end-effector positions and tangential speeds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotionSamples {
    pub t: Vec<f64>,
    pub position: Vec<[f64; 3]>,
    pub speed: Vec<f64>,
}

impl MotionSamples {
    pub fn from_trace<T: Real>(trace: &SimTrace<T>) -> Self {
        let mut s = Self::default();
        for r in &trace.records {
            s.t.push(r.t.f64());
            s.position.push([r.x[0].f64(), r.x[1].f64(), r.x[2].f64()]);
            s.speed.push(r.speed.f64());
        }
        s
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn compute_metrics<T: Real>(trace: &SimTrace<T>) -> Result<MotionMetrics> {
    compute_sample_metrics(&MotionSamples::from_trace(trace))
}

pub fn compute_sample_metrics(s: &MotionSamples) -> Result<MotionMetrics> {
    let n = s.len();
    if n < 3 || s.position.len() != n || s.speed.len() != n {
        return Err(Error::DegenerateMotion(format!(
            "need at least 3 consistent samples, got {n}"
        )));
    }
    let start = s.position[0];
    let end = s.position[n - 1];
    let chord = sub(&end, &start);
    let chord_length = norm(&chord);
    if !(chord_length > MIN_CHORD) {
        return Err(Error::DegenerateMotion("start and end points coincide".into()));
    }
    let peak_speed = s.speed.iter().copied().fold(0.0, f64::max);
    if !(peak_speed > 0.0) {
        return Err(Error::DegenerateMotion("speed is zero throughout".into()));
    }

    let path_length = s.position.windows(2).map(|w| norm(&sub(&w[1], &w[0]))).sum();
    let max_lateral_deviation = s
        .position
        .iter()
        .map(|p| norm(&cross(&sub(p, &start), &chord)) / chord_length)
        .fold(0.0, f64::max);

    let threshold = ONSET_FRACTION * peak_speed;
    let on = s.speed.iter().position(|&v| v > threshold).expect("peak exceeds threshold");
    let off = s.speed.iter().rposition(|&v| v > threshold).expect("peak exceeds threshold");

    let plateau: Vec<usize> = (0..n)
        .filter(|&i| s.speed[i] >= peak_speed * (1.0 - PLATEAU_RTOL))
        .collect();
    let t_peak = 0.5 * (s.t[plateau[0]] + s.t[*plateau.last().expect("non-empty")]);

    let (t_on, t_off) = (s.t[on], s.t[off]);
    let t_move = t_off - t_on;
    let (t_peak_fraction, symmetry_index) = if t_move > 0.0 {
        let before = integrate(&s.t, &s.speed, on, off, t_on, t_peak);
        let total = integrate(&s.t, &s.speed, on, off, t_on, t_off);
        (
            ((t_peak - t_on) / t_move).clamp(0.0, 1.0),
            if total > 0.0 { (before / total).clamp(0.0, 1.0) } else { 0.5 },
        )
    } else {
        (0.5, 0.5)
    };

    Ok(MotionMetrics {
        path_length,
        chord_length,
        max_lateral_deviation,
        straightness_ratio: max_lateral_deviation / chord_length,
        peak_speed,
        t_peak_fraction,
        symmetry_index,
        n_speed_peaks: count_peaks(&s.speed, PEAK_FLOOR_FRACTION * peak_speed),
    })
}

/// Trapezoid integral of `v` over `[a, b]` restricted to samples
/// `lo..=hi`, interpolating linearly at the bounds.
fn integrate(t: &[f64], v: &[f64], lo: usize, hi: usize, a: f64, b: f64) -> f64 {
    let mut area = 0.0;
    for i in lo..hi {
        let (t0, t1) = (t[i], t[i + 1]);
        let l = t0.max(a);
        let r = t1.min(b);
        if r <= l || t1 <= t0 {
            continue;
        }
        let lerp = |x: f64| v[i] + (v[i + 1] - v[i]) * (x - t0) / (t1 - t0);
        area += 0.5 * (lerp(l) + lerp(r)) * (r - l);
    }
    area
}

/// Counts local maxima whose height and topographic prominence both reach
/// `floor`. Runs of equal samples count as one candidate.
fn count_peaks(v: &[f64], floor: f64) -> usize {
    let mut levels: Vec<f64> = Vec::with_capacity(v.len());
    for &x in v {
        if levels.last() != Some(&x) {
            levels.push(x);
        }
    }
    let m = levels.len();
    let mut count = 0;
    for i in 0..m {
        let h = levels[i];
        let left_ok = i == 0 || levels[i - 1] < h;
        let right_ok = i + 1 == m || levels[i + 1] < h;
        if !(left_ok && right_ok) || h < floor {
            continue;
        }
        // Lowest point on each side before terrain rises above this peak.
        let mut left_min = h;
        for &x in levels[..i].iter().rev() {
            if x > h {
                break;
            }
            left_min = left_min.min(x);
        }
        let left_higher = levels[..i].iter().any(|&x| x > h);
        let mut right_min = h;
        for &x in &levels[i + 1..] {
            if x > h {
                break;
            }
            right_min = right_min.min(x);
        }
        let right_higher = levels[i + 1..].iter().any(|&x| x > h);
        let base = match (left_higher, right_higher) {
            (true, true) => left_min.max(right_min),
            (true, false) => left_min,
            (false, true) => right_min,
            (false, false) => left_min.min(right_min),
        };
        // The global maximum (no higher terrain anywhere) always counts.
        if (!left_higher && !right_higher) || h - base >= floor {
            count += 1;
        }
    }
    count
}
