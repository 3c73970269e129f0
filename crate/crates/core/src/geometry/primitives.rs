//! Procedural shapes in canonical pose: up is +z, the front faces -y.
//!
//! Every generator except the sphere rescales its output so that the
//! longest bounding-box side is 1 and the box is centred on the origin.
//! The sphere keeps radius 0.5, which already satisfies that.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::mesh::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Cylinder,
    Chairlike,
    Tablelike,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 5] = [Self::Sphere, Self::Box, Self::Cylinder, Self::Chairlike, Self::Tablelike];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sphere => "sphere",
            Self::Box => "box",
            Self::Cylinder => "cylinder",
            Self::Chairlike => "chairlike",
            Self::Tablelike => "tablelike",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown primitive kind '{s}'")))
    }
}

/// Chair parameters. Lengths are relative; the mesh is rescaled afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChairParams {
    /// 0.3 ..= 1.0
    pub seat_width: f64,
    /// 0.3 ..= 1.0
    pub seat_depth: f64,
    /// 0.2 ..= 1.0
    pub leg_height: f64,
    /// 3 or 4
    pub legs: u8,
    pub backrest: bool,
    /// 0.2 ..= 1.0, ignored without a backrest
    pub back_height: f64,
    pub armrests: bool,
}

/// Table parameters. Lengths are relative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableParams {
    /// 0.4 ..= 1.5
    pub top_width: f64,
    /// 0.4 ..= 1.5
    pub top_depth: f64,
    /// 0.3 ..= 1.0
    pub height: f64,
    /// 3 or 4
    pub legs: u8,
}

/// Fully specified primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveSpec {
    /// Triangle budget 20 ..= 20000.
    Sphere { triangle_budget: usize },
    /// Side lengths, each 0.05 ..= 10.
    Box { size: [f64; 3] },
    /// Radius 0.05 ..= 2, height 0.05 ..= 4, segments 3 ..= 256.
    Cylinder { radius: f64, height: f64, segments: usize },
    Chairlike(ChairParams),
    Tablelike(TableParams),
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("primitive parameter out of range: {what}")))
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    v.is_finite() && v >= lo && v <= hi
}

impl PrimitiveSpec {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Self::Sphere { .. } => PrimitiveKind::Sphere,
            Self::Box { .. } => PrimitiveKind::Box,
            Self::Cylinder { .. } => PrimitiveKind::Cylinder,
            Self::Chairlike(_) => PrimitiveKind::Chairlike,
            Self::Tablelike(_) => PrimitiveKind::Tablelike,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Sphere { triangle_budget } => check((20..=20_000).contains(&triangle_budget), "sphere budget"),
            Self::Box { size } => check(size.iter().all(|&s| within(s, 0.05, 10.0)), "box size"),
            Self::Cylinder {
                radius,
                height,
                segments,
            } => {
                check(within(radius, 0.05, 2.0), "cylinder radius")?;
                check(within(height, 0.05, 4.0), "cylinder height")?;
                check((3..=256).contains(&segments), "cylinder segments")
            }
            Self::Chairlike(c) => {
                check(within(c.seat_width, 0.3, 1.0), "seat width")?;
                check(within(c.seat_depth, 0.3, 1.0), "seat depth")?;
                check(within(c.leg_height, 0.2, 1.0), "leg height")?;
                check(c.legs == 3 || c.legs == 4, "leg count")?;
                check(within(c.back_height, 0.2, 1.0), "back height")
            }
            Self::Tablelike(t) => {
                check(within(t.top_width, 0.4, 1.5), "top width")?;
                check(within(t.top_depth, 0.4, 1.5), "top depth")?;
                check(within(t.height, 0.3, 1.0), "table height")?;
                check(t.legs == 3 || t.legs == 4, "leg count")
            }
        }
    }

    /// Draws parameters uniformly within the documented ranges.
    pub fn sample(kind: PrimitiveKind, rng: &mut impl Rng) -> Self {
        match kind {
            PrimitiveKind::Sphere => Self::Sphere {
                triangle_budget: rng.gen_range(200..=2000),
            },
            PrimitiveKind::Box => Self::Box {
                size: [rng.gen_range(0.2..=1.0), rng.gen_range(0.2..=1.0), rng.gen_range(0.2..=1.0)],
            },
            PrimitiveKind::Cylinder => Self::Cylinder {
                radius: rng.gen_range(0.1..=0.6),
                height: rng.gen_range(0.2..=1.2),
                segments: rng.gen_range(12..=32),
            },
            PrimitiveKind::Chairlike => Self::Chairlike(ChairParams {
                seat_width: rng.gen_range(0.4..=0.8),
                seat_depth: rng.gen_range(0.4..=0.8),
                leg_height: rng.gen_range(0.3..=0.6),
                legs: if rng.gen_bool(0.5) { 4 } else { 3 },
                backrest: true,
                back_height: rng.gen_range(0.4..=0.9),
                armrests: rng.gen_bool(0.5),
            }),
            PrimitiveKind::Tablelike => Self::Tablelike(TableParams {
                top_width: rng.gen_range(0.6..=1.4),
                top_depth: rng.gen_range(0.5..=1.0),
                height: rng.gen_range(0.4..=0.9),
                legs: if rng.gen_bool(0.5) { 4 } else { 3 },
            }),
        }
    }

    /// Compact `key=value` rendering used in dataset manifests.
    pub fn describe(&self) -> String {
        match *self {
            Self::Sphere { triangle_budget } => format!("budget={triangle_budget}"),
            Self::Box { size } => format!("size={:.4}x{:.4}x{:.4}", size[0], size[1], size[2]),
            Self::Cylinder {
                radius,
                height,
                segments,
            } => format!("r={radius:.4},h={height:.4},seg={segments}"),
            Self::Chairlike(c) => format!(
                "w={:.4},d={:.4},leg={:.4},legs={},back={},bh={:.4},arms={}",
                c.seat_width, c.seat_depth, c.leg_height, c.legs, c.backrest as u8, c.back_height, c.armrests as u8
            ),
            Self::Tablelike(t) => format!(
                "w={:.4},d={:.4},h={:.4},legs={}",
                t.top_width, t.top_depth, t.height, t.legs
            ),
        }
    }
}

/// Axis-aligned box with the given centre and half extents, outward winding.
pub fn box_mesh<R: Real>(center: [f64; 3], half: [f64; 3]) -> Result<TriangleMesh<R>> {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let s = |bit: usize| if i >> bit & 1 == 1 { 1.0 } else { -1.0 };
        vertices.push([
            R::lit(center[0] + s(0) * half[0]),
            R::lit(center[1] + s(1) * half[1]),
            R::lit(center[2] + s(2) * half[2]),
        ]);
    }
    // vertex index = x | y << 1 | z << 2
    let faces = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(vertices, faces)
}

fn sphere<R: Real>(budget: usize) -> Result<TriangleMesh<R>> {
    // 4 s (s - 1) triangles for s stacks and 2 s slices
    let mut stacks = 2;
    while 4 * (stacks + 1) * stacks <= budget {
        stacks += 1;
    }
    let slices = 2 * stacks;
    let radius = 0.5;
    let mut vertices = vec![[R::zero(), R::zero(), R::lit(radius)]];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / slices as f64;
            vertices.push([
                R::lit(radius * theta.sin() * phi.cos()),
                R::lit(radius * theta.sin() * phi.sin()),
                R::lit(radius * theta.cos()),
            ]);
        }
    }
    vertices.push([R::zero(), R::zero(), R::lit(-radius)]);
    let bottom = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
        faces.push([bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn cylinder<R: Real>(radius: f64, height: f64, segments: usize) -> Result<TriangleMesh<R>> {
    let h = height / 2.0;
    let mut vertices = vec![[R::zero(), R::zero(), R::lit(h)], [R::zero(), R::zero(), R::lit(-h)]];
    for j in 0..segments {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
        let (x, y) = (radius * phi.cos(), radius * phi.sin());
        vertices.push([R::lit(x), R::lit(y), R::lit(h)]);
        vertices.push([R::lit(x), R::lit(y), R::lit(-h)]);
    }
    let top = |j: usize| 2 + 2 * (j % segments);
    let bot = |j: usize| 3 + 2 * (j % segments);
    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, top(j), top(j + 1)]);
        faces.push([1, bot(j + 1), bot(j)]);
        faces.push([top(j), bot(j), bot(j + 1)]);
        faces.push([top(j), bot(j + 1), top(j + 1)]);
    }
    TriangleMesh::new(vertices, faces)
}

const LEG: f64 = 0.05;

fn leg_positions(legs: u8, half_w: f64, half_d: f64) -> Vec<[f64; 2]> {
    let (x, y) = (half_w - LEG, half_d - LEG);
    if legs == 4 {
        vec![[-x, -y], [x, -y], [-x, y], [x, y]]
    } else {
        // two at the front corners, one centred at the back
        vec![[-x, -y], [x, -y], [0.0, y]]
    }
}

fn assemble<R: Real>(parts: &[([f64; 3], [f64; 3])]) -> Result<TriangleMesh<R>> {
    let mut mesh = box_mesh(parts[0].0, parts[0].1)?;
    for &(c, h) in &parts[1..] {
        mesh.merge(&box_mesh(c, h)?);
    }
    Ok(mesh)
}

fn chair<R: Real>(p: &ChairParams) -> Result<TriangleMesh<R>> {
    let (hw, hd) = (p.seat_width / 2.0, p.seat_depth / 2.0);
    let seat_t = 0.05;
    let seat_z = p.leg_height + seat_t / 2.0;
    let seat_top = p.leg_height + seat_t;
    let mut parts = vec![([0.0, 0.0, seat_z], [hw, hd, seat_t / 2.0])];
    for [x, y] in leg_positions(p.legs, hw, hd) {
        parts.push(([x, y, p.leg_height / 2.0], [LEG / 2.0 * 1.2, LEG / 2.0 * 1.2, p.leg_height / 2.0]));
    }
    if p.backrest {
        let t = 0.04;
        parts.push((
            [0.0, hd - t / 2.0, seat_top + p.back_height / 2.0],
            [hw, t / 2.0, p.back_height / 2.0],
        ));
    }
    if p.armrests {
        let arm_z = seat_top + 0.22;
        let t = 0.04;
        for side in [-1.0, 1.0] {
            let x = side * (hw - t / 2.0);
            parts.push(([x, 0.0, arm_z], [t / 2.0, hd, t / 2.0]));
            parts.push(([x, -hd + t / 2.0, (seat_top + arm_z) / 2.0], [t / 2.0, t / 2.0, (arm_z - seat_top) / 2.0]));
        }
    }
    assemble(&parts)
}

fn table<R: Real>(p: &TableParams) -> Result<TriangleMesh<R>> {
    let (hw, hd) = (p.top_width / 2.0, p.top_depth / 2.0);
    let top_t = 0.05;
    let mut parts = vec![([0.0, 0.0, p.height - top_t / 2.0], [hw, hd, top_t / 2.0])];
    let leg_h = p.height - top_t;
    for [x, y] in leg_positions(p.legs, hw, hd) {
        parts.push(([x, y, leg_h / 2.0], [LEG / 2.0 * 1.4, LEG / 2.0 * 1.4, leg_h / 2.0]));
    }
    assemble(&parts)
}

/// Recentres and rescales so the longest bounding-box side is 1.
pub fn normalize_mesh<R: Real>(mesh: &TriangleMesh<R>) -> Result<TriangleMesh<R>> {
    let (lo, hi) = mesh.bounds();
    let ext = (0..3).map(|k| hi[k] - lo[k]).fold(R::zero(), R::max);
    let half = R::lit(0.5);
    let c: [R; 3] = std::array::from_fn(|k| (lo[k] + hi[k]) * half);
    mesh.map_vertices(|v| std::array::from_fn(|k| (v[k] - c[k]) / ext))
}

/// Builds the mesh for a fully specified primitive.
pub fn generate_primitive<R: Real>(spec: &PrimitiveSpec) -> Result<TriangleMesh<R>> {
    spec.validate()?;
    match *spec {
        PrimitiveSpec::Sphere { triangle_budget } => sphere(triangle_budget),
        PrimitiveSpec::Box { size } => normalize_mesh(&box_mesh::<R>([0.0; 3], size.map(|s| s / 2.0))?),
        PrimitiveSpec::Cylinder {
            radius,
            height,
            segments,
        } => normalize_mesh(&cylinder::<R>(radius, height, segments)?),
        PrimitiveSpec::Chairlike(p) => normalize_mesh(&chair::<R>(&p)?),
        PrimitiveSpec::Tablelike(p) => normalize_mesh(&table::<R>(&p)?),
    }
}

/// Draws parameters for `kind` from `seed` and builds the mesh.
pub fn generate_random_primitive<R: Real>(kind: PrimitiveKind, seed: u64) -> Result<(PrimitiveSpec, TriangleMesh<R>)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = PrimitiveSpec::sample(kind, &mut rng);
    Ok((spec, generate_primitive(&spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box() {
        let m: TriangleMesh<f64> = generate_primitive(&PrimitiveSpec::Box { size: [1.0; 3] }).unwrap();
        assert_eq!(m.faces().len(), 12);
        for v in m.vertices() {
            assert!(v.iter().all(|c| c.abs() == 0.5));
        }
        assert!((m.total_area() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn box_normals_point_outward() {
        let m: TriangleMesh<f64> = box_mesh([0.0; 3], [0.5; 3]).unwrap();
        for f in 0..12 {
            let [a, b, c] = m.triangle(f);
            let n = super::super::mesh::cross(super::super::mesh::sub(b, a), super::super::mesh::sub(c, a));
            let centroid: [f64; 3] = std::array::from_fn(|k| (a[k] + b[k] + c[k]) / 3.0);
            let dot: f64 = (0..3).map(|k| n[k] * centroid[k]).sum();
            assert!(dot > 0.0, "face {f}");
        }
    }

    #[test]
    fn sphere_vertices_on_radius() {
        let m: TriangleMesh<f64> = generate_primitive(&PrimitiveSpec::Sphere { triangle_budget: 2000 }).unwrap();
        assert!(m.faces().len() <= 2000 && m.faces().len() > 1500);
        for v in m.vertices() {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((r - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn longest_extent_is_one() {
        for kind in PrimitiveKind::ALL {
            for seed in 0..5 {
                let (_, m) = generate_random_primitive::<f64>(kind, seed).unwrap();
                let (lo, hi) = m.bounds();
                let ext = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
                assert!((ext - 1.0).abs() < 1e-9, "{kind} {ext}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_random_primitive::<f64>(PrimitiveKind::Chairlike, 7).unwrap();
        let b = generate_random_primitive::<f64>(PrimitiveKind::Chairlike, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_rejected() {
        let bad = PrimitiveSpec::Chairlike(ChairParams {
            seat_width: 0.5,
            seat_depth: 0.5,
            leg_height: 0.4,
            legs: 5,
            backrest: true,
            back_height: 0.5,
            armrests: false,
        });
        assert!(generate_primitive::<f64>(&bad).is_err());
        assert!(generate_primitive::<f64>(&PrimitiveSpec::Sphere { triangle_budget: 3 }).is_err());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in PrimitiveKind::ALL {
            assert_eq!(k.name().parse::<PrimitiveKind>().unwrap(), k);
        }
    }
}
