//! Procedural watertight test shapes, all inside the sampling cube.

use std::f64::consts::PI;

use super::{TriMesh, Vec3};

/// Surface of revolution about the z axis.
///
/// `profile` lists `(z, rho)` pairs from one pole to the other; the first and
/// last entries must have `rho == 0` and become single pole vertices. Faces
/// are wound outward.
pub fn revolve(profile: &[(f64, f64)], n_lon: usize) -> TriMesh {
    assert!(profile.len() >= 3, "profile needs two poles and a ring");
    assert!(n_lon >= 3, "need at least 3 longitude segments");
    let rings = &profile[1..profile.len() - 1];
    let mut vertices = Vec::with_capacity(2 + rings.len() * n_lon);
    vertices.push(Vec3::new(0.0, 0.0, profile[0].0));
    for &(z, rho) in rings {
        for j in 0..n_lon {
            let phi = 2.0 * PI * j as f64 / n_lon as f64;
            vertices.push(Vec3::new(rho * phi.cos(), rho * phi.sin(), z));
        }
    }
    let south = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].0));

    let ring = |i: usize, j: usize| 1 + i * n_lon + (j % n_lon);
    let mut faces = Vec::with_capacity(2 * n_lon * rings.len());
    for j in 0..n_lon {
        faces.push([0, ring(0, j), ring(0, j + 1)]);
    }
    for i in 0..rings.len() - 1 {
        for j in 0..n_lon {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    let last = rings.len() - 1;
    for j in 0..n_lon {
        faces.push([south, ring(last, j + 1), ring(last, j)]);
    }
    let mut mesh = TriMesh { vertices, faces };
    mesh.orient_outward();
    mesh
}

/// Axis-aligned box with corners `lo` and `hi`, 12 outward triangles.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriMesh {
    let v = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { hi.x } else { lo.x },
            if y { hi.y } else { lo.y },
            if z { hi.z } else { lo.z },
        )
    };
    let vertices = vec![
        v(false, false, false),
        v(true, false, false),
        v(true, true, false),
        v(false, true, false),
        v(false, false, true),
        v(true, false, true),
        v(true, true, true),
        v(false, true, true),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh { vertices, faces }
}

/// Sphere of radius `radius` at the origin.
pub fn sphere(radius: f64) -> TriMesh {
    super::uv_sphere(64, 128, radius)
        .expect("valid resolution")
        .mesh
}

/// Cube of side `side` centered at the origin.
pub fn cube(side: f64) -> TriMesh {
    let h = side / 2.0;
    box_mesh(Vec3::repeat(-h), Vec3::repeat(h))
}

/// Cylinder of radius `radius` with hemispherical caps; the straight part
/// spans `z in [-half_length, half_length]`.
pub fn capsule(radius: f64, half_length: f64) -> TriMesh {
    let n_cap = 32;
    let mut profile = Vec::new();
    for i in 0..=n_cap {
        let theta = 0.5 * PI * i as f64 / n_cap as f64;
        profile.push((half_length + radius * theta.cos(), radius * theta.sin()));
    }
    for i in 1..8 {
        let z = half_length - 2.0 * half_length * i as f64 / 8.0;
        profile.push((z, radius));
    }
    for i in 0..=n_cap {
        let theta = 0.5 * PI + 0.5 * PI * i as f64 / n_cap as f64;
        profile.push((-half_length + radius * theta.cos(), radius * theta.sin()));
    }
    profile.last_mut().unwrap().1 = 0.0;
    profile[0].1 = 0.0;
    revolve(&profile, 96)
}

/// Two spherical lobes of radius `lobe` centered at `z = ±offset`, joined by
/// a cylindrical neck of radius `neck`.
pub fn dumbbell(lobe: f64, offset: f64, neck: f64) -> TriMesh {
    assert!(neck < lobe && offset > 0.0 && offset < lobe + offset);
    // polar angle (from the +z pole of the upper lobe) where the lobe meets
    // the neck, on the inner side
    let join = PI - (neck / lobe).asin();
    let join_z = offset + lobe * join.cos();
    assert!(join_z > 0.0, "lobes overlap past the neck");
    let n_cap = 48;
    let mut profile = Vec::new();
    for i in 0..=n_cap {
        let theta = join * i as f64 / n_cap as f64;
        profile.push((offset + lobe * theta.cos(), lobe * theta.sin()));
    }
    let n_neck = 6;
    for i in 1..n_neck {
        let z = join_z - 2.0 * join_z * i as f64 / n_neck as f64;
        profile.push((z, neck));
    }
    for i in 0..=n_cap {
        let theta = join * (n_cap - i) as f64 / n_cap as f64;
        profile.push((-offset - lobe * theta.cos(), lobe * theta.sin()));
    }
    profile[0].1 = 0.0;
    profile.last_mut().unwrap().1 = 0.0;
    revolve(&profile, 96)
}

/// The bundled analytic fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Sphere,
    Cube,
    Capsule,
    Dumbbell,
}

impl Fixture {
    pub const ALL: [Fixture; 4] = [Fixture::Sphere, Fixture::Cube, Fixture::Capsule, Fixture::Dumbbell];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Sphere => "sphere",
            Fixture::Cube => "cube",
            Fixture::Capsule => "capsule",
            Fixture::Dumbbell => "dumbbell",
        }
    }

    pub fn from_name(name: &str) -> Option<Fixture> {
        Fixture::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Sphere of radius 0.35, cube of side 0.6, capsule of radius 0.2 and
    /// length 0.9, dumbbell with 0.2-radius lobes at ±0.25 and a 0.07 neck.
    pub fn mesh(self) -> TriMesh {
        match self {
            Fixture::Sphere => sphere(0.35),
            Fixture::Cube => cube(0.6),
            Fixture::Capsule => capsule(0.2, 0.25),
            Fixture::Dumbbell => dumbbell(0.2, 0.25, 0.07),
        }
    }
}
