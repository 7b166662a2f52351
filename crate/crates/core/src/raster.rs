//! Bird's-eye-view scene rasterization, SDV-centred with the SDV heading pointing up.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::joint::{JointActor, JointSceneSample, SdvPose};
use crate::tensor::{lit, Matrix, Scalar};
use crate::trajectory::{ActorType, Point};

pub const WHITE: [u8; 3] = [255, 255, 255];
pub const BLACK: [u8; 3] = [0, 0, 0];
pub const RED: [u8; 3] = [255, 0, 0];
pub const YELLOW: [u8; 3] = [255, 255, 0];
pub const GREEN: [u8; 3] = [0, 255, 0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterSpec {
    pub height: usize,
    pub width: usize,
    /// Metres per pixel.
    pub resolution: f64,
    pub history_steps: usize,
    pub fade_factor: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub pedestrian_radius: f64,
    pub other_radius: f64,
}

impl Default for RasterSpec {
    fn default() -> Self {
        Self {
            height: 500,
            width: 500,
            resolution: 0.2,
            history_steps: 5,
            fade_factor: 0.8,
            vehicle_length: 4.5,
            vehicle_width: 2.0,
            pedestrian_radius: 0.4,
            other_radius: 0.4,
        }
    }
}

impl RasterSpec {
    /// Covered extent in metres, `(along heading, across)`.
    pub fn extent(&self) -> (f64, f64) {
        (self.height as f64 * self.resolution, self.width as f64 * self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("raster size must be positive".into()));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::Config(format!("raster resolution {} must be positive", self.resolution)));
        }
        if !(self.fade_factor > 0.0 && self.fade_factor < 1.0) {
            return Err(Error::Config(format!("fade_factor {} must lie in (0, 1)", self.fade_factor)));
        }
        if self.vehicle_length <= 0.0
            || self.vehicle_width <= 0.0
            || self.pedestrian_radius <= 0.0
            || self.other_radius <= 0.0
        {
            return Err(Error::Config("actor footprint sizes must be positive".into()));
        }
        Ok(())
    }

    /// Brightness multiplier for a step `age` frames in the past.
    pub fn fade(&self, age: usize) -> f64 {
        let mut f = 1.0;
        for _ in 0..age {
            f *= self.fade_factor;
        }
        f
    }
}

/// `H x W x 3` image, row-major, row 0 in front of the SDV.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
    pub sdv_pose: SdvPose,
}

impl RasterImage {
    pub fn filled(height: usize, width: usize, color: [u8; 3]) -> Self {
        let data = std::iter::repeat_n(color, height * width).flatten().collect();
        Self { height, width, data, sdv_pose: SdvPose::default() }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, row: usize, col: usize, color: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Binary portable pixmap (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_ppm()).map_err(|e| Error::io(path, e))
    }

    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.to_ppm());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Channel-major `3 x (H*W)` matrix scaled to `[0, 1]`.
    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        let n = self.height * self.width;
        let mut m = Matrix::zeros(3, n);
        for p in 0..n {
            for ch in 0..3 {
                m.set(ch, p, lit::<T>(self.data[3 * p + ch] as f64 / 255.0));
            }
        }
        m
    }
}

/// Maps global coordinates into continuous pixel coordinates `(row, col)`; the SDV sits
/// at the centre of pixel `(H/2, W/2)`.
#[derive(Copy, Clone, Debug)]
struct PixelFrame {
    origin: Point,
    cos: f64,
    sin: f64,
    res: f64,
    center: (f64, f64),
}

impl PixelFrame {
    fn new(pose: &SdvPose, spec: &RasterSpec) -> Self {
        Self {
            origin: [pose.x, pose.y],
            cos: pose.heading.cos(),
            sin: pose.heading.sin(),
            res: spec.resolution,
            center: ((spec.height / 2) as f64, (spec.width / 2) as f64),
        }
    }

    /// Global point of the centre of pixel `(row, col)`.
    fn to_world(&self, row: usize, col: usize) -> Point {
        let fwd = (self.center.0 - row as f64) * self.res;
        let left = (self.center.1 - col as f64) * self.res;
        [self.origin[0] + self.cos * fwd - self.sin * left, self.origin[1] + self.sin * fwd + self.cos * left]
    }

    fn to_pixel(&self, p: Point) -> (f64, f64) {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        let fwd = self.cos * dx + self.sin * dy;
        let left = -self.sin * dx + self.cos * dy;
        (self.center.0 - fwd / self.res, self.center.1 - left / self.res)
    }
}

enum Shape {
    Polygon(Vec<Point>),
    Box { center: Point, heading: f64, half_len: f64, half_wid: f64 },
    Disc { center: Point, radius: f64 },
}

impl Shape {
    const EPS: f64 = 1e-9;

    fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Polygon(v) => point_in_polygon(p, v),
            Shape::Box { center, heading, half_len, half_wid } => {
                let (s, c) = heading.sin_cos();
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let u = c * dx + s * dy;
                let w = -s * dx + c * dy;
                u.abs() <= half_len + Self::EPS && w.abs() <= half_wid + Self::EPS
            }
            Shape::Disc { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius + Self::EPS
            }
        }
    }

    /// Axis-aligned world bounding box `(min, max)`.
    fn bounds(&self) -> (Point, Point) {
        match self {
            Shape::Polygon(v) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for p in v {
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
            Shape::Box { center, half_len, half_wid, .. } => {
                let r = half_len.hypot(*half_wid);
                ([center[0] - r, center[1] - r], [center[0] + r, center[1] + r])
            }
            Shape::Disc { center, radius } => {
                ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
            }
        }
    }
}

/// Even-odd crossing test.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn paint(img: &mut RasterImage, frame: &PixelFrame, shape: &Shape, color: [u8; 3]) {
    let (lo, hi) = shape.bounds();
    let corners = [[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]];
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in corners {
        let (r, col) = frame.to_pixel(c);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(col);
        cmax = cmax.max(col);
    }
    if !(rmin.is_finite() && rmax.is_finite() && cmin.is_finite() && cmax.is_finite()) {
        return;
    }
    let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64 - 1.0);
    if rmax < 0.0 || cmax < 0.0 || rmin > (img.height - 1) as f64 || cmin > (img.width - 1) as f64 {
        return;
    }
    let r0 = clamp(rmin.floor(), img.height) as usize;
    let r1 = clamp(rmax.ceil(), img.height) as usize;
    let c0 = clamp(cmin.floor(), img.width) as usize;
    let c1 = clamp(cmax.ceil(), img.width) as usize;
    for r in r0..=r1 {
        for c in c0..=c1 {
            if shape.contains(frame.to_world(r, c)) {
                img.put(r, c, color);
            }
        }
    }
}

fn scaled(color: [u8; 3], f: f64) -> [u8; 3] {
    color.map(|ch| (ch as f64 * f).round() as u8)
}

/// Heading at an observed step, from the displacement into that step when the actor
/// moved, otherwise the heading at `t = 0`.
fn step_heading(actor: &JointActor, idx: usize) -> f64 {
    const MIN_STEP: f64 = 0.05;
    if idx > 0 {
        let a = actor.observed[idx - 1];
        let b = actor.observed[idx];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        if dx.hypot(dy) > MIN_STEP {
            return dy.atan2(dx);
        }
    }
    actor.heading
}

fn actor_layer(img: &mut RasterImage, frame: &PixelFrame, spec: &RasterSpec, actor: &JointActor, color: [u8; 3]) {
    let n = actor.observed.len();
    if n == 0 {
        return;
    }
    let oldest = spec.history_steps.min(n - 1);
    for age in (0..=oldest).rev() {
        let idx = n - 1 - age;
        let center = actor.observed[idx];
        if !(center[0].is_finite() && center[1].is_finite()) {
            continue;
        }
        let shape = match actor.actor_type {
            ActorType::Vehicle => Shape::Box {
                center,
                heading: if age == 0 { actor.heading } else { step_heading(actor, idx) },
                half_len: spec.vehicle_length / 2.0,
                half_wid: spec.vehicle_width / 2.0,
            },
            ActorType::Pedestrian => Shape::Disc { center, radius: spec.pedestrian_radius },
            ActorType::Other => Shape::Disc { center, radius: spec.other_radius },
        };
        paint(img, frame, &shape, scaled(color, spec.fade(age)));
    }
}

/// Renders drivable area, then other actors, vehicles, the SDV and pedestrians, each
/// actor's history oldest first.
pub fn rasterize(sample: &JointSceneSample, spec: &RasterSpec) -> Result<RasterImage> {
    spec.validate()?;
    let mut img = RasterImage::filled(spec.height, spec.width, BLACK);
    img.sdv_pose = sample.sdv;
    let frame = PixelFrame::new(&sample.sdv, spec);
    for poly in &sample.drivable {
        paint(&mut img, &frame, &Shape::Polygon(poly.clone()), WHITE);
    }
    let of_type = |t: ActorType| sample.actors.iter().filter(move |a| a.actor_type == t);
    for a in of_type(ActorType::Other) {
        actor_layer(&mut img, &frame, spec, a, BLACK);
    }
    for a in of_type(ActorType::Vehicle) {
        actor_layer(&mut img, &frame, spec, a, YELLOW);
    }
    let sdv = Shape::Box {
        center: [sample.sdv.x, sample.sdv.y],
        heading: sample.sdv.heading,
        half_len: spec.vehicle_length / 2.0,
        half_wid: spec.vehicle_width / 2.0,
    };
    paint(&mut img, &frame, &sdv, RED);
    for a in of_type(ActorType::Pedestrian) {
        actor_layer(&mut img, &frame, spec, a, GREEN);
    }
    Ok(img)
}
