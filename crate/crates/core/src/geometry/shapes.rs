//! Synthetic point-cloud generators.
//!
//! Every shape lives in `R^3`. Samples are drawn on the ideal surface (holes
//! carved out by rejection), then isotropic Gaussian noise with standard
//! deviation `noise` is added. Output is a deterministic function of the
//! spec and the seed.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

/// Cylinder radius used by [`ShapeKind::CylinderHoles`].
pub const CYLINDER_RADIUS: f64 = 1.5;
/// Cylinder height used by [`ShapeKind::CylinderHoles`].
pub const CYLINDER_HEIGHT: f64 = 3.2;
/// Largest hole radius carved into the cylinder (measured on the surface).
pub const CYLINDER_HOLE_RADIUS: f64 = 1.0;

const SWISS_T_MIN: f64 = 1.5 * PI;
const SWISS_T_MAX: f64 = 4.5 * PI;
const SWISS_HEIGHT: f64 = 21.0;
// The holed roll makes only three quarters of a turn. With a full turn and a
// half the coil itself closes a loop in the ambient Rips filtration.
const SWISS_HOLE_T_MAX: f64 = 3.0 * PI;

const RING_OUTER: f64 = 1.0;
const RING_INNER: f64 = 0.5;
const RING_SPACING: f64 = 1.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ShapeKind {
    /// Circle of the given radius in the `z = 0` plane.
    Circle {
        #[serde(default = "one")]
        radius: f64,
    },
    /// Torus with area-uniform sampling.
    Torus {
        #[serde(default = "two")]
        major: f64,
        #[serde(default = "torus_minor")]
        minor: f64,
    },
    SwissRoll,
    /// Swiss roll with an elliptical hole in the middle of the sheet.
    SwissRollHole,
    /// Two unit circles in perpendicular planes touching at the origin.
    FigureEightBended,
    /// Short open cylinder (a band) with `holes` round holes around its waist.
    CylinderHoles { holes: usize },
    /// S-shaped sheet with a `rows x cols` grid of irregular holes.
    SSurfaceHoles { rows: usize, cols: usize },
    /// A chain of fused annuli, bent isometrically into an arch.
    RingChain { rings: usize },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn torus_minor() -> f64 {
    0.8
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Circle { .. } => "circle",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::SwissRoll => "swiss_roll",
            ShapeKind::SwissRollHole => "swiss_roll_hole",
            ShapeKind::FigureEightBended => "figure_eight_bended",
            ShapeKind::CylinderHoles { .. } => "cylinder_holes",
            ShapeKind::SSurfaceHoles { .. } => "s_surface_holes",
            ShapeKind::RingChain { .. } => "ring_chain",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Circle { radius } if *radius == 1.0 => f.write_str("circle"),
            ShapeKind::Circle { radius } => write!(f, "circle({radius})"),
            ShapeKind::Torus { major, minor } => write!(f, "torus({major},{minor})"),
            ShapeKind::CylinderHoles { holes } => write!(f, "cylinder_holes({holes})"),
            ShapeKind::SSurfaceHoles { rows, cols } => write!(f, "s_surface_holes({rows},{cols})"),
            ShapeKind::RingChain { rings } => write!(f, "ring_chain({rings})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Parses `name` or `name(a,b,...)`, e.g. `cylinder_holes(3)`.
impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            Some(_) => return Err(Error::Parse(format!("malformed shape `{s}`"))),
            None => (s, ""),
        };
        let args: Vec<f64> = args
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| {
                a.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad shape argument `{a}` in `{s}`")))
            })
            .collect::<Result<_>>()?;
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Parse(format!("expected a count in `{s}`, got {v}")))
            }
        };
        let arity = |max: usize| -> Result<()> {
            if args.len() > max {
                Err(Error::Parse(format!("too many arguments in `{s}`")))
            } else {
                Ok(())
            }
        };
        let kind = match name {
            "circle" => {
                arity(1)?;
                ShapeKind::Circle {
                    radius: args.first().copied().unwrap_or(1.0),
                }
            }
            "torus" => {
                arity(2)?;
                ShapeKind::Torus {
                    major: args.first().copied().unwrap_or(2.0),
                    minor: args.get(1).copied().unwrap_or(0.8),
                }
            }
            "swiss_roll" => {
                arity(0)?;
                ShapeKind::SwissRoll
            }
            "swiss_roll_hole" => {
                arity(0)?;
                ShapeKind::SwissRollHole
            }
            "figure_eight_bended" => {
                arity(0)?;
                ShapeKind::FigureEightBended
            }
            "cylinder_holes" => {
                arity(1)?;
                ShapeKind::CylinderHoles {
                    holes: args.first().map_or(Ok(3), |&v| count(v))?,
                }
            }
            "s_surface_holes" => {
                arity(2)?;
                ShapeKind::SSurfaceHoles {
                    rows: args.first().map_or(Ok(3), |&v| count(v))?,
                    cols: args.get(1).map_or(Ok(11), |&v| count(v))?,
                }
            }
            "ring_chain" => {
                arity(1)?;
                ShapeKind::RingChain {
                    rings: args.first().map_or(Ok(4), |&v| count(v))?,
                }
            }
            _ => return Err(Error::UnknownShape(name.to_string())),
        };
        Ok(kind)
    }
}

/// Which shape to sample, how many points, and the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: ShapeKind,
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
}

impl ShapeSpec {
    pub fn new(shape: ShapeKind, n: usize, noise: f64) -> Self {
        Self { shape, n, noise }
    }
}

/// Samples `spec.n` points from the named shape.
pub fn generate_shape(spec: &ShapeSpec, seed: u64) -> Result<PointCloud> {
    if spec.n == 0 {
        return Err(Error::param("n", "point count must be positive"));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::param("noise", "noise must be a finite nonnegative number"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(spec.n * 3);
    match spec.shape {
        ShapeKind::Circle { radius } => {
            positive("radius", radius)?;
            for _ in 0..spec.n {
                let t = rng.random_range(0.0..TAU);
                coords.extend_from_slice(&[radius * t.cos(), radius * t.sin(), 0.0]);
            }
        }
        ShapeKind::Torus { major, minor } => {
            positive("major", major)?;
            positive("minor", minor)?;
            if minor >= major {
                return Err(Error::param("minor", "minor radius must be below the major radius"));
            }
            while coords.len() < spec.n * 3 {
                let (u, v) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
                let accept: f64 = rng.random();
                if accept * (major + minor) > major + minor * v.cos() {
                    continue;
                }
                let ring = major + minor * v.cos();
                coords.extend_from_slice(&[ring * u.cos(), ring * u.sin(), minor * v.sin()]);
            }
        }
        ShapeKind::SwissRoll | ShapeKind::SwissRollHole => {
            let holed = matches!(spec.shape, ShapeKind::SwissRollHole);
            let t_max = if holed { SWISS_HOLE_T_MAX } else { SWISS_T_MAX };
            while coords.len() < spec.n * 3 {
                let t = rng.random_range(SWISS_T_MIN..t_max);
                let h = rng.random_range(0.0..SWISS_HEIGHT);
                if holed && in_swiss_hole(t, h) {
                    continue;
                }
                coords.extend_from_slice(&[t * t.cos(), h, t * t.sin()]);
            }
        }
        ShapeKind::FigureEightBended => {
            for _ in 0..spec.n {
                let t = rng.random_range(0.0..TAU);
                if rng.random::<bool>() {
                    coords.extend_from_slice(&[-1.0 + t.cos(), t.sin(), 0.0]);
                } else {
                    coords.extend_from_slice(&[1.0 - t.cos(), 0.0, t.sin()]);
                }
            }
        }
        ShapeKind::CylinderHoles { holes } => {
            let rho = cylinder_hole_radius(holes);
            while coords.len() < spec.n * 3 {
                let theta = rng.random_range(0.0..TAU);
                let z = rng.random_range(0.0..CYLINDER_HEIGHT);
                let carved = (0..holes).any(|k| {
                    let centre = TAU * k as f64 / holes as f64;
                    let dtheta = wrap_angle(theta - centre);
                    (CYLINDER_RADIUS * dtheta).hypot(z - CYLINDER_HEIGHT / 2.0) < rho
                });
                if carved {
                    continue;
                }
                coords.extend_from_slice(&[
                    CYLINDER_RADIUS * theta.cos(),
                    CYLINDER_RADIUS * theta.sin(),
                    z,
                ]);
            }
        }
        ShapeKind::SSurfaceHoles { rows, cols } => {
            let t_span = 3.0 * PI;
            let height = 2.0;
            let (cell_t, cell_y) = (t_span / cols.max(1) as f64, height / rows.max(1) as f64);
            let base = 0.3 * cell_t.min(cell_y);
            // Irregular holes: jittered radii and centres.
            let hole_list: Vec<(f64, f64, f64)> = (0..rows * cols)
                .map(|idx| {
                    let (r, c) = (idx / cols, idx % cols);
                    let jt = rng.random_range(-0.1..0.1) * cell_t;
                    let jy = rng.random_range(-0.1..0.1) * cell_y;
                    let radius = base * rng.random_range(0.8..1.2);
                    (
                        -t_span / 2.0 + (c as f64 + 0.5) * cell_t + jt,
                        (r as f64 + 0.5) * cell_y + jy,
                        radius,
                    )
                })
                .collect();
            while coords.len() < spec.n * 3 {
                let t = rng.random_range(-t_span / 2.0..t_span / 2.0);
                let y = rng.random_range(0.0..height);
                if hole_list.iter().any(|&(ht, hy, r)| (t - ht).hypot(y - hy) < r) {
                    continue;
                }
                coords.extend_from_slice(&[t.sin(), y, t.signum() * (t.cos() - 1.0)]);
            }
        }
        ShapeKind::RingChain { rings } => {
            if rings == 0 {
                return Err(Error::param("rings", "need at least one ring"));
            }
            let length = RING_SPACING * (rings - 1) as f64 + 2.0 * RING_OUTER;
            // Arc of 120 degrees; the bend is an isometry of the flat sheet.
            let bend = length / (TAU / 3.0);
            let x0 = -RING_OUTER;
            while coords.len() < spec.n * 3 {
                let x = rng.random_range(x0..x0 + length);
                let y = rng.random_range(-RING_OUTER..RING_OUTER);
                let mut inside = false;
                let mut in_hole = false;
                for k in 0..rings {
                    let r = (x - RING_SPACING * k as f64).hypot(y);
                    inside |= r <= RING_OUTER;
                    in_hole |= r < RING_INNER;
                }
                if !inside || in_hole {
                    continue;
                }
                let s = x - x0 - length / 2.0;
                let phi = s / bend;
                coords.extend_from_slice(&[bend * phi.sin(), y, bend * (1.0 - phi.cos())]);
            }
        }
    }

    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise).expect("noise validated above");
        coords.iter_mut().for_each(|c| *c += normal.sample(&mut rng));
    }
    PointCloud::from_flat(3, coords)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

/// Hole radius used for `holes` holes: the default radius, shrunk when
/// neighboring holes would otherwise touch.
pub fn cylinder_hole_radius(holes: usize) -> f64 {
    if holes == 0 {
        return 0.0;
    }
    let spacing = TAU * CYLINDER_RADIUS / holes as f64;
    CYLINDER_HOLE_RADIUS.min(0.4 * spacing)
}

fn in_swiss_hole(t: f64, h: f64) -> bool {
    let (t0, h0) = (0.5 * (SWISS_T_MIN + SWISS_HOLE_T_MAX), SWISS_HEIGHT / 2.0);
    let (a, b) = (0.9, 5.0);
    // skewed ellipse keeps the hole irregular
    let dt = (t - t0) / a;
    let dh = (h - h0) / b;
    dt * dt + dh * dh + 0.35 * dt * dh < 1.0
}

/// Distance from a point to the ideal (noise-free) surface of `shape`.
/// Only defined for the shapes whose surface has a closed-form distance;
/// returns `None` otherwise.
pub fn distance_to_surface(shape: &ShapeKind, p: &[f64]) -> Option<f64> {
    let (x, y, z) = (p[0], p[1], p[2]);
    match *shape {
        ShapeKind::Circle { radius } => Some((x.hypot(y) - radius).hypot(z)),
        ShapeKind::Torus { major, minor } => Some(((x.hypot(y) - major).hypot(z) - minor).abs()),
        ShapeKind::FigureEightBended => {
            let a = ((x + 1.0).hypot(y) - 1.0).hypot(z);
            let b = ((x - 1.0).hypot(z) - 1.0).hypot(y);
            Some(a.min(b))
        }
        ShapeKind::CylinderHoles { .. } => {
            let radial = (x.hypot(y) - CYLINDER_RADIUS).abs();
            let below = (-z).max(0.0);
            let above = (z - CYLINDER_HEIGHT).max(0.0);
            Some(radial.hypot(below.max(above)))
        }
        _ => None,
    }
}
