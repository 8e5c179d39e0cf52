//! Denavit–Hartenberg chains, rigid transforms and pose error metrics.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{IkError, Result};

/// Entrywise tolerance used when validating rotation blocks.
pub const POSE_TOLERANCE: f64 = 1e-9;

/// Limits whose magnitude reaches this value are treated as the full half-turn.
pub const FULL_RANGE_EPS: f64 = 1e-9;

/// One revolute link in standard D-H convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhLink {
    /// Offset along the previous z axis, meters.
    pub d: f64,
    /// Link length along the common normal, meters.
    pub r: f64,
    /// Twist about the common normal, radians.
    pub alpha: f64,
    #[serde(default = "neg_pi")]
    pub theta_min: f64,
    #[serde(default = "pos_pi")]
    pub theta_max: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub theta_hat: f64,
}

fn neg_pi() -> f64 {
    -PI
}
fn pos_pi() -> f64 {
    PI
}
fn one() -> f64 {
    1.0
}

impl DhLink {
    /// A full-range link with unit weight and zero preferred angle.
    pub fn new(d: f64, r: f64, alpha: f64) -> Self {
        Self { d, r, alpha, theta_min: -PI, theta_max: PI, weight: 1.0, theta_hat: 0.0 }
    }

    pub fn with_limits(mut self, theta_min: f64, theta_max: f64) -> Self {
        self.theta_min = theta_min;
        self.theta_max = theta_max;
        self
    }

    pub fn with_preferred(mut self, theta_hat: f64) -> Self {
        self.theta_hat = theta_hat;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }

    fn validate(&self, index: usize) -> Result<()> {
        let finite = [self.d, self.r, self.alpha, self.theta_min, self.theta_max, self.weight, self.theta_hat]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(IkError::InvalidChain(format!("link {index} has a non-finite parameter")));
        }
        if !(-PI - 1e-12..=1e-12).contains(&self.theta_min) {
            return Err(IkError::InvalidChain(format!(
                "link {index}: theta_min = {} must lie in [-pi, 0]",
                self.theta_min
            )));
        }
        if !(-1e-12..=PI + 1e-12).contains(&self.theta_max) {
            return Err(IkError::InvalidChain(format!(
                "link {index}: theta_max = {} must lie in [0, pi]",
                self.theta_max
            )));
        }
        if self.weight < 0.0 {
            return Err(IkError::InvalidChain(format!("link {index}: negative weight {}", self.weight)));
        }
        Ok(())
    }
}

/// Serial chain of revolute links plus the index at which the pose constraint is split.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    links: Vec<DhLink>,
    split: usize,
}

#[derive(Serialize, Deserialize)]
struct ChainFile {
    links: Vec<DhLink>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<usize>,
}

impl KinematicChain {
    /// Validates the links, normalizes weights to sum to one and picks the split.
    ///
    /// `split` is the number of links on the left-hand product; it defaults to
    /// `ceil(n / 2)` and may equal `n`, in which case the right-hand product is empty.
    pub fn new(links: Vec<DhLink>, split: Option<usize>) -> Result<Self> {
        let n = links.len();
        if n == 0 {
            return Err(IkError::InvalidChain("chain needs at least one link".into()));
        }
        for (i, link) in links.iter().enumerate() {
            link.validate(i)?;
        }
        let total: f64 = links.iter().map(|l| l.weight).sum();
        if total <= 0.0 {
            return Err(IkError::InvalidChain("weights must not all be zero".into()));
        }
        let links: Vec<DhLink> = links
            .into_iter()
            .map(|mut l| {
                l.weight /= total;
                l.theta_hat = wrap_angle(l.theta_hat);
                l
            })
            .collect();
        let split = split.unwrap_or(n.div_ceil(2));
        if split == 0 || split > n {
            return Err(IkError::InvalidChain(format!("split {split} outside [1, {n}]")));
        }
        Ok(Self { links, split })
    }

    pub fn links(&self) -> &[DhLink] {
        &self.links
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    /// Number of links on the left (base-anchored) side of the split.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn with_split(&self, split: usize) -> Result<Self> {
        Self::new(self.links.clone(), Some(split))
    }

    /// Same chain with the preferred angles replaced.
    pub fn with_preferred(&self, theta_hat: &[f64]) -> Result<Self> {
        self.check_len(theta_hat.len())?;
        let mut links = self.links.clone();
        for (l, &t) in links.iter_mut().zip(theta_hat) {
            l.theta_hat = wrap_angle(t);
        }
        Ok(Self { links, split: self.split })
    }

    pub fn preferred(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.theta_hat).collect()
    }

    pub fn within_limits(&self, theta: &[f64]) -> bool {
        theta.len() == self.dof() && self.links.iter().zip(theta).all(|(l, &t)| l.contains(t))
    }

    /// Clamps each angle into its joint range.
    pub fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        self.links.iter().zip(theta).map(|(l, &t)| t.clamp(l.theta_min, l.theta_max)).collect()
    }

    /// Weighted distance to the preferred angles, `sum 2 w_i (1 - cos(theta_i - theta_hat_i))`.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.links.iter().zip(theta).map(|(l, &t)| 2.0 * l.weight * (1.0 - (t - l.theta_hat).cos())).sum()
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.dof() {
            return Err(IkError::LengthMismatch { expected: self.dof(), got });
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        Self::new(file.links, file.split)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ChainFile { links: self.links.clone(), split: Some(self.split) };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// Rigid transform as a 4x4 homogeneous matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(Matrix4<f64>);

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    /// Accepts a matrix whose rotation block is orthonormal within [`POSE_TOLERANCE`]
    /// and whose bottom row is exactly `(0, 0, 0, 1)`. The rotation is re-orthonormalized.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        Self::validate(&m)?;
        let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
        let svd = rot.svd(true, true);
        let (u, v_t) = (svd.u.expect("requested u"), svd.v_t.expect("requested v_t"));
        let mut out = m;
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(u * v_t));
        Ok(Pose(out))
    }

    /// Wraps a matrix without projection; used for products of valid transforms.
    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> Self {
        Pose(m)
    }

    pub fn validate(m: &Matrix4<f64>) -> Result<()> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(IkError::InvalidPose("non-finite entry".into()));
        }
        if m[(3, 0)] != 0.0 || m[(3, 1)] != 0.0 || m[(3, 2)] != 0.0 || m[(3, 3)] != 1.0 {
            return Err(IkError::InvalidPose("bottom row must be (0, 0, 0, 1)".into()));
        }
        let rot = m.fixed_view::<3, 3>(0, 0).into_owned();
        let dev = (rot.transpose() * rot - Matrix3::identity()).abs().max();
        if dev > POSE_TOLERANCE {
            return Err(IkError::InvalidPose(format!("rotation block is not orthonormal (deviation {dev:e})")));
        }
        let det = rot.determinant();
        if (det - 1.0).abs() > POSE_TOLERANCE {
            return Err(IkError::InvalidPose(format!("rotation determinant {det} != 1")));
        }
        Ok(())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose(Matrix4::new_translation(&Vector3::new(x, y, z)))
    }

    /// Rotation about z by `angle` radians.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        Pose(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.0[(0, 3)], self.0[(1, 3)], self.0[(2, 3)])
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().transpose();
        let t = -(rt * self.translation());
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Pose(m)
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose(self.0 * other.0)
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[(i, j)];
            }
        }
        out
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::new(Matrix4::from_fn(|i, j| rows[i][j]))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(deserializer)?;
        Pose::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Raw D-H transform of `link` at `theta` (frame i relative to frame i-1).
pub fn dh_raw(link: &DhLink, cos_t: f64, sin_t: f64) -> Matrix4<f64> {
    let (sa, ca) = link.alpha.sin_cos();
    Matrix4::new(
        cos_t, -ca * sin_t, sa * sin_t, link.r * cos_t, //
        sin_t, ca * cos_t, -sa * cos_t, link.r * sin_t, //
        0.0, sa, ca, link.d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Inverse D-H transform in the form that stays affine in `(cos, sin)`.
pub fn dh_inverse_raw(link: &DhLink, cos_t: f64, sin_t: f64) -> Matrix4<f64> {
    let (sa, ca) = link.alpha.sin_cos();
    Matrix4::new(
        cos_t, sin_t, 0.0, -link.r, //
        -ca * sin_t, ca * cos_t, sa, -sa * link.d, //
        sa * sin_t, -sa * cos_t, ca, -ca * link.d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Derivative of the D-H transform with respect to the joint angle.
pub fn dh_derivative(link: &DhLink, theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    let (sa, ca) = link.alpha.sin_cos();
    Matrix4::new(
        -s, -ca * c, sa * c, -link.r * s, //
        c, -ca * s, sa * s, link.r * c, //
        0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0,
    )
}

pub fn dh_matrix(link: &DhLink, theta: f64) -> Pose {
    let (s, c) = theta.sin_cos();
    Pose(dh_raw(link, c, s))
}

pub fn dh_inverse(link: &DhLink, theta: f64) -> Pose {
    let (s, c) = theta.sin_cos();
    Pose(dh_inverse_raw(link, c, s))
}

/// Product of the per-link transforms in link order.
pub fn forward_kinematics(chain: &KinematicChain, theta: &[f64]) -> Result<Pose> {
    chain.check_len(theta.len())?;
    Ok(Pose(fk_links(chain.links(), theta)))
}

pub(crate) fn fk_links(links: &[DhLink], theta: &[f64]) -> Matrix4<f64> {
    links.iter().zip(theta).fold(Matrix4::identity(), |acc, (l, &t)| {
        let (s, c) = t.sin_cos();
        acc * dh_raw(l, c, s)
    })
}

/// Positional (meters) and rotational (radians, geodesic) distance between two poses.
pub fn pose_error(a: &Pose, b: &Pose) -> (f64, f64) {
    let positional = (a.translation() - b.translation()).norm();
    let rel = a.rotation().transpose() * b.rotation();
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near zero; fall back on the skew part for small angles.
    let rotational = if cos > 0.999 {
        let w = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]);
        (0.5 * w.norm()).clamp(-1.0, 1.0).asin()
    } else {
        cos.acos()
    };
    (positional, rotational)
}

/// Recovers joint angles from (cos, sin) pairs via `atan2`; pairs need not lie on the unit circle.
pub fn recover_angles(c: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    if c.len() != s.len() {
        return Err(IkError::LengthMismatch { expected: c.len(), got: s.len() });
    }
    c.iter()
        .zip(s)
        .enumerate()
        .map(|(i, (&ci, &si))| {
            if (ci == 0.0 && si == 0.0) || !ci.is_finite() || !si.is_finite() {
                Err(IkError::DegenerateAngle(i))
            } else {
                Ok(wrap_angle(si.atan2(ci)))
            }
        })
        .collect()
}

/// Smallest interval containing `cos(theta)` (or `sin`) for `theta` in `[lo, hi]`.
pub fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    trig_range(lo, hi, f64::cos, 0.0)
}

pub fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    trig_range(lo, hi, f64::sin, -PI / 2.0)
}

// `phase` shifts the function so that its maxima sit at phase + 2k*pi.
fn trig_range(lo: f64, hi: f64, f: fn(f64) -> f64, phase: f64) -> (f64, f64) {
    let (a, b) = (f(lo), f(hi));
    let mut min = a.min(b);
    let mut max = a.max(b);
    let contains = |point: f64| {
        let k = ((lo - point) / (2.0 * PI)).ceil();
        point + k * 2.0 * PI <= hi
    };
    // maxima of cos at 2k*pi, of sin at pi/2 + 2k*pi
    if contains(-phase) {
        max = 1.0;
    }
    if contains(-phase + PI) {
        min = -1.0;
    }
    (min, max)
}
