//! Scene layouts: flat polygon objects placed on a background, viewpoint
//! changes, and geometric degradation.
//!
//! Only IEEE basic arithmetic is used (trigonometry included, via a series),
//! so layouts are bit-reproducible across platforms.

use rand::Rng;

use crate::seed::rng_for;

const PI: f64 = std::f64::consts::PI;
const TAU: f64 = std::f64::consts::TAU;

/// `(sin x, cos x)` from a Taylor series after reduction to [−π, π].
pub fn sin_cos(x: f64) -> (f64, f64) {
    let r = x - (x / TAU).round() * TAU;
    let r2 = r * r;
    let (mut s, mut c) = (0.0, 0.0);
    let (mut ts, mut tc) = (r, 1.0);
    for k in 0..14 {
        s += ts;
        c += tc;
        let n = (2 * k + 2) as f64;
        tc *= -r2 / (n * (n - 1.0));
        ts *= -r2 / ((n + 1.0) * n);
    }
    (s, c)
}

fn rotate(p: [f64; 2], (s, c): (f64, f64)) -> [f64; 2] {
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Identity of a keypoint within a base layout: (object index, feature index).
pub type FeatureKey = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub center: [f64; 2],
    pub vertices: Vec<[f64; 2]>,
    pub marks: Vec<[f64; 2]>,
    pub mark_radius: f64,
    pub color: [f64; 3],
    pub mark_color: [f64; 3],
    /// Unit vector across the stripe texture, in image coordinates.
    pub stripe_dir: [f64; 2],
    pub stripe_period: f64,
}

impl SceneObject {
    /// Rigid-with-scale motion `p ↦ pivot + scale·R(angle)·(p − pivot) + shift`.
    fn transform(&self, pivot: [f64; 2], angle: f64, scale: f64, shift: [f64; 2]) -> SceneObject {
        if angle == 0.0 && scale == 1.0 && shift == [0.0, 0.0] {
            return self.clone();
        }
        let sc = sin_cos(angle);
        let map = |p: [f64; 2]| {
            let q = rotate([p[0] - pivot[0], p[1] - pivot[1]], sc);
            [pivot[0] + scale * q[0] + shift[0], pivot[1] + scale * q[1] + shift[1]]
        };
        SceneObject {
            center: map(self.center),
            vertices: self.vertices.iter().map(|&p| map(p)).collect(),
            marks: self.marks.iter().map(|&p| map(p)).collect(),
            mark_radius: self.mark_radius * scale,
            color: self.color,
            mark_color: self.mark_color,
            stripe_dir: rotate(self.stripe_dir, sc),
            stripe_period: self.stripe_period * scale,
        }
    }

    /// Polygon corners followed by interior marks, each with its feature key.
    pub fn features(&self, index: usize) -> impl Iterator<Item = (FeatureKey, [f64; 2])> + '_ {
        let n = self.vertices.len();
        self.vertices
            .iter()
            .enumerate()
            .map(move |(k, &p)| ((index, k), p))
            .chain(self.marks.iter().enumerate().map(move |(m, &p)| ((index, n + m), p)))
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
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
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub width: u32,
    pub height: u32,
    pub background: [f64; 3],
    pub objects: Vec<SceneObject>,
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// A random arrangement of non-overlapping star-shaped polygons.
pub fn base_layout(layout_seed: u64, width: u32, height: u32, n_objects: usize) -> Layout {
    let mut rng = rng_for(layout_seed, "layout");
    let background = [
        rng.gen_range(50.0..140.0),
        rng.gen_range(50.0..140.0),
        rng.gen_range(50.0..140.0),
    ];
    let (w, h) = (width as f64, height as f64);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let radius = rng.gen_range(0.07..0.12) * w.min(h);
        let margin = radius + 0.08 * w.min(h);
        let mut center = [w / 2.0, h / 2.0];
        for _ in 0..200 {
            center = [rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin)];
            let clear = objects.iter().all(|o| {
                let r_o = o
                    .vertices
                    .iter()
                    .map(|v| ((v[0] - o.center[0]).powi(2) + (v[1] - o.center[1]).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                let d = ((o.center[0] - center[0]).powi(2) + (o.center[1] - center[1]).powi(2)).sqrt();
                d > r_o + radius + 3.0
            });
            if clear {
                break;
            }
        }
        let n = rng.gen_range(3..=6usize);
        let phase = rng.gen_range(0.0..TAU);
        let vertices = (0..n)
            .map(|k| {
                let ang = phase + TAU * k as f64 / n as f64 + rng.gen_range(-0.2..0.2) * TAU / n as f64;
                let r = radius * rng.gen_range(0.75..1.0);
                let (s, c) = sin_cos(ang);
                [center[0] + r * c, center[1] + r * s]
            })
            .collect();
        let marks = (0..2)
            .map(|m| {
                let ang = rng.gen_range(0.0..TAU) + PI * m as f64;
                let (s, c) = sin_cos(ang);
                let r = 0.4 * radius;
                [center[0] + r * c, center[1] + r * s]
            })
            .collect();
        let mut color = background;
        for _ in 0..50 {
            color = [
                rng.gen_range(20.0..235.0),
                rng.gen_range(20.0..235.0),
                rng.gen_range(20.0..235.0),
            ];
            if color_distance(color, background) > 90.0 {
                break;
            }
        }
        let mark_color = color.map(|c| if c > 128.0 { c - 100.0 } else { c + 100.0 });
        let (s, c) = sin_cos(rng.gen_range(0.0..PI));
        objects.push(SceneObject {
            center,
            vertices,
            marks,
            mark_radius: 0.13 * radius,
            color,
            mark_color,
            stripe_dir: [c, s],
            stripe_period: rng.gen_range(3.0..7.0),
        });
    }
    Layout {
        width,
        height,
        background,
        objects,
    }
}

/// A camera change between captures of the same layout: in-plane rotation and
/// scale about the image centre, then a shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub angle: f64,
    pub scale: f64,
    pub shift: [f64; 2],
}

impl Viewpoint {
    pub const IDENTITY: Viewpoint = Viewpoint {
        angle: 0.0,
        scale: 1.0,
        shift: [0.0, 0.0],
    };

    pub fn sample(view_seed: u64) -> Viewpoint {
        let mut rng = rng_for(view_seed, "viewpoint");
        Viewpoint {
            angle: rng.gen_range(-0.17..0.17),
            scale: rng.gen_range(0.92..1.08),
            shift: [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
        }
    }

    pub fn apply(&self, layout: &Layout) -> Layout {
        let pivot = [layout.width as f64 / 2.0, layout.height as f64 / 2.0];
        Layout {
            objects: layout
                .objects
                .iter()
                .map(|o| o.transform(pivot, self.angle, self.scale, self.shift))
                .collect(),
            ..layout.clone()
        }
    }
}

/// Geometric corruption at `level` ∈ [0, 1]: a global in-plane rotation plus an
/// independent rigid jitter on a `√level` fraction of the objects, with jitter
/// magnitude also growing as `√level`. Random draws do not depend on `level`,
/// so a single seed yields a nested family of corruptions.
pub fn degrade_geometry(layout: &Layout, level: f64, degradation_seed: u64) -> Layout {
    let mut rng = rng_for(degradation_seed, "geometry");
    let global = rng.gen_range(0.5..1.0) * if rng.gen_bool(0.5) { 0.2 } else { -0.2 };
    // concave in level so mid-level corruption already moves most objects
    let strength = level.sqrt();
    let pivot = [layout.width as f64 / 2.0, layout.height as f64 / 2.0];
    let short = (layout.width.min(layout.height)) as f64;
    let objects = layout
        .objects
        .iter()
        .map(|o| {
            let pick: f64 = rng.gen_range(0.0..1.0);
            let dir = rng.gen_range(0.0..TAU);
            let mag = rng.gen_range(0.12..0.22) * short;
            let spin = rng.gen_range(-1.0..1.0);
            let o = if pick < strength {
                let (s, c) = sin_cos(dir);
                let shift = [strength * mag * c, strength * mag * s];
                o.transform(o.center, strength * spin, 1.0, shift)
            } else {
                o.clone()
            };
            o.transform(pivot, level * global, 1.0, [0.0, 0.0])
        })
        .collect();
    Layout {
        objects,
        ..layout.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_trig_matches_libm() {
        for i in -200..200 {
            let x = i as f64 * 0.137;
            let (s, c) = sin_cos(x);
            assert!((s - x.sin()).abs() < 1e-13 && (c - x.cos()).abs() < 1e-13, "{x}");
        }
    }

    #[test]
    fn layout_is_deterministic() {
        assert_eq!(base_layout(4, 128, 128, 8), base_layout(4, 128, 128, 8));
        assert_ne!(base_layout(4, 128, 128, 8), base_layout(5, 128, 128, 8));
    }

    #[test]
    fn zero_level_is_identity() {
        let l = base_layout(1, 128, 128, 6);
        assert_eq!(degrade_geometry(&l, 0.0, 99), l);
        assert_eq!(Viewpoint::IDENTITY.apply(&l), l);
    }

    #[test]
    fn polygon_contains_center() {
        let l = base_layout(2, 128, 128, 6);
        for o in &l.objects {
            assert!(o.contains(o.center));
            assert!(!o.contains([-1.0, -1.0]));
        }
    }

    #[test]
    fn objects_stay_on_canvas() {
        for seed in 0..20 {
            let l = base_layout(seed, 128, 128, 8);
            for o in &l.objects {
                for v in &o.vertices {
                    assert!(v[0] > 0.0 && v[0] < 128.0 && v[1] > 0.0 && v[1] < 128.0);
                }
            }
        }
    }
}
