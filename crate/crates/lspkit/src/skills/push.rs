//! Quasi-static pusher-slider with an ellipsoidal limit surface.
//!
//! The slider is a square of half-width `a`. The pusher touches face `f` at
//! `p = a n_f + s t_f` in the slider frame, where `n_f` is the outward normal
//! and `t_f` the face tangent. For a contact force `f` the slider twist is
//! `(f, (p x f) / c^2)`, so the slider's velocity at the contact point is `M f`
//! with `M = I + [[py^2, -px py], [-px py, px^2]] / c^2`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactParams {
    /// Limit-surface torque/force ratio, meters.
    pub c: f64,
    /// Friction coefficient at the pusher contact.
    pub mu: f64,
    /// Half-width of the square slider, meters.
    pub half_width: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { c: 0.05, mu: 0.3, half_width: 0.05 }
    }
}

/// Outward normal and tangent of face `f` (0: +x, 1: +y, 2: -x, 3: -y).
pub fn face_frame(f: usize) -> ([f64; 2], [f64; 2]) {
    match f % 4 {
        0 => ([1.0, 0.0], [0.0, 1.0]),
        1 => ([0.0, 1.0], [-1.0, 0.0]),
        2 => ([-1.0, 0.0], [0.0, -1.0]),
        _ => ([0.0, -1.0], [1.0, 0.0]),
    }
}

/// Motion over one interval of the pushed slider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushMotion {
    /// Slider twist in its own frame: `(vx, vy, omega)`.
    pub twist: [f64; 3],
    /// Rate of the contact coordinate along the face.
    pub slip: f64,
    pub sticking: bool,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl ContactParams {
    fn mobility(&self, p: [f64; 2], f: [f64; 2]) -> [f64; 2] {
        let c2 = self.c * self.c;
        let (px, py) = (p[0], p[1]);
        [
            f[0] + (py * py * f[0] - px * py * f[1]) / c2,
            f[1] + (-px * py * f[0] + px * px * f[1]) / c2,
        ]
    }

    fn solve_mobility(&self, p: [f64; 2], v: [f64; 2]) -> [f64; 2] {
        let c2 = self.c * self.c;
        let (px, py) = (p[0], p[1]);
        let (a, b, d) = (1.0 + py * py / c2, -px * py / c2, 1.0 + px * px / c2);
        let det = a * d - b * b;
        [(d * v[0] - b * v[1]) / det, (a * v[1] - b * v[0]) / det]
    }

    /// Slider response to pushing face `face` at coordinate `s` with normal
    /// speed `v_n` (into the face) and tangential speed `v_t`.
    pub fn motion(&self, face: usize, s: f64, v_n: f64, v_t: f64) -> PushMotion {
        let (n, t) = face_frame(face);
        if v_n <= 0.0 {
            return PushMotion { twist: [0.0; 3], slip: v_t, sticking: false };
        }
        let a = self.half_width;
        let p = [a * n[0] + s * t[0], a * n[1] + s * t[1]];
        let vp = [-v_n * n[0] + v_t * t[0], -v_n * n[1] + v_t * t[1]];

        let stick = self.solve_mobility(p, vp);
        let f_n = -dot(stick, n);
        let f_t = dot(stick, t);
        let (f, sticking) = if f_n > 0.0 && f_t.abs() <= self.mu * f_n {
            (stick, true)
        } else {
            let sigma = if f_t >= 0.0 { 1.0 } else { -1.0 };
            let e = [-n[0] + sigma * self.mu * t[0], -n[1] + sigma * self.mu * t[1]];
            let kappa = dot(vp, n) / dot(self.mobility(p, e), n);
            ([kappa * e[0], kappa * e[1]], false)
        };
        let c2 = self.c * self.c;
        let omega = (p[0] * f[1] - p[1] * f[0]) / c2;
        let slip = if sticking { 0.0 } else { dot(vp, t) - dot(self.mobility(p, f), t) };
        PushMotion { twist: [f[0], f[1], omega], slip, sticking }
    }
}
