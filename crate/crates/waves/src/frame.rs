//! Oscillation directions: twelve dodecahedral face normals plus a family
//! of sixteen rotations keyed by the parity class of a four-dimensional
//! lattice index.
//!
//! Waves born at neighboring lattice cells must never oscillate in exactly
//! opposite directions, otherwise their interference terms would carry a
//! non-oscillatory part that the high-frequency error estimates cannot
//! absorb.  The rotations guarantee a uniform lower bound `c` on
//! `|f∘O + f′∘O′|` over every cross-class pair of directions.  They were
//! found once by a randomized hill-climb (see `examples/gen_frame.rs`) and
//! are frozen into `data/frame.json`; loading re-verifies the bound
//! exhaustively.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::WaveError;

/// Golden ratio, the shape constant of the regular dodecahedron.
pub const PHI: f64 = 1.618033988749894848;

/// The twelve face directions with their rotation family.
///
/// Faces are stored so that `faces[2p + 1] = -faces[2p]`: even indices are
/// the six base directions, odd indices their negations.  `rotations[c]`
/// is the orthogonal matrix attached to parity class `c ∈ 0..16`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DodecahedralFrame {
    pub faces: [[f64; 3]; 12],
    pub rotations: [[[f64; 3]; 3]; 16],
    pub separation_c: f64,
}

/// Face index of the oppositely-oscillating partner (`f ↦ -f`).
pub fn conjugate_face(face: usize) -> usize {
    face ^ 1
}

/// Companion face supplying the direction that is projected onto the
/// orthogonal plane of `face`'s phase gradient.  Chosen as the cyclic
/// coordinate rotation `(x,y,z) ↦ (z,x,y)` of the face vector, which maps
/// the face set to itself, never fixes `±f`, and commutes with negation —
/// the latter is what makes conjugate waves carry conjugate amplitudes.
pub fn companion_face(face: usize) -> usize {
    // Base directions are cyclic triples; rotation advances within the triple.
    const SIGMA: [usize; 6] = [1, 2, 0, 4, 5, 3];
    2 * SIGMA[face / 2] + (face & 1)
}

/// The six base directions of the dodecahedron, un-normalized.
fn base_directions() -> [[f64; 3]; 6] {
    [
        [0.0, 1.0, PHI],
        [PHI, 0.0, 1.0],
        [1.0, PHI, 0.0],
        [0.0, 1.0, -PHI],
        [-PHI, 0.0, 1.0],
        [1.0, -PHI, 0.0],
    ]
}

/// The twelve unit face directions in the frozen index order.
pub fn face_directions() -> [[f64; 3]; 12] {
    let n = (1.0 + PHI * PHI).sqrt();
    let mut out = [[0.0; 3]; 12];
    for (p, d) in base_directions().iter().enumerate() {
        for a in 0..3 {
            out[2 * p][a] = d[a] / n;
            out[2 * p + 1][a] = -d[a] / n;
        }
    }
    out
}

fn apply(f: [f64; 3], o: &[[f64; 3]; 3]) -> [f64; 3] {
    // Row vector composition f∘O: (f∘O)_j = Σ_i f_i O_ij.
    let mut out = [0.0; 3];
    for j in 0..3 {
        for (i, fi) in f.iter().enumerate() {
            out[j] += fi * o[i][j];
        }
    }
    out
}

impl DodecahedralFrame {
    /// Parity class of a four-dimensional lattice index.
    pub fn rotation_class(k: &[i64; 4]) -> usize {
        let mut c = 0usize;
        for (b, ki) in k.iter().enumerate() {
            c |= ((ki.rem_euclid(2)) as usize) << b;
        }
        c
    }

    /// Oscillation direction of face `face` at lattice index `k`.
    pub fn direction(&self, k: &[i64; 4], face: usize) -> [f64; 3] {
        self.direction_class(Self::rotation_class(k), face)
    }

    /// Oscillation direction of face `face` in parity class `class`.
    pub fn direction_class(&self, class: usize, face: usize) -> [f64; 3] {
        apply(self.faces[face], &self.rotations[class])
    }

    /// Minimum of `|f∘O_c + f′∘O_c′|` over all pairs except the exact
    /// cancellations `f′ = -f, c = c′`.
    pub fn verify_separation(&self) -> f64 {
        let mut min = f64::INFINITY;
        for c in 0..16 {
            for cp in 0..16 {
                for f in 0..12 {
                    for fp in 0..12 {
                        if c == cp && fp == conjugate_face(f) {
                            continue;
                        }
                        let u = apply(self.faces[f], &self.rotations[c]);
                        let w = apply(self.faces[fp], &self.rotations[cp]);
                        let s = ((u[0] + w[0]).powi(2)
                            + (u[1] + w[1]).powi(2)
                            + (u[2] + w[2]).powi(2))
                        .sqrt();
                        min = min.min(s);
                    }
                }
            }
        }
        min
    }
}

/// Cross-class separation of a candidate rotation family: the minimum of
/// `|f∘O_c + f′∘O_c′|` over distinct classes only.  Same-class pairs are
/// controlled by the rigid geometry of the face set and need no search.
fn cross_separation(faces: &[[f64; 3]; 12], rots: &[Matrix3<f64>; 16]) -> f64 {
    let rotated: Vec<Vec<Vector3<f64>>> = rots
        .iter()
        .map(|o| {
            faces
                .iter()
                .map(|f| o.transpose() * Vector3::new(f[0], f[1], f[2]))
                .collect()
        })
        .collect();
    let mut min = f64::INFINITY;
    for c in 0..16 {
        for cp in (c + 1)..16 {
            for u in &rotated[c] {
                for w in &rotated[cp] {
                    min = min.min((u + w).norm());
                }
            }
        }
    }
    min
}

fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

/// Randomized search for a rotation family with cross-class separation at
/// least `floor`: random restarts followed by hill-climbing perturbations
/// of the worst-performing rotations.
pub fn search_frame(seed: u64, restarts: usize, floor: f64) -> Result<DodecahedralFrame, WaveError> {
    let faces = face_directions();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_rot = |rng: &mut ChaCha8Rng| {
        UnitQuaternion::from_euler_angles(
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
        .to_rotation_matrix()
        .into_inner()
    };
    let mut best: Option<([Matrix3<f64>; 16], f64)> = None;
    for _ in 0..restarts {
        let mut rots: [Matrix3<f64>; 16] = std::array::from_fn(|_| random_rot(&mut rng));
        rots[0] = Matrix3::identity();
        let mut score = cross_separation(&faces, &rots);
        // Hill-climb: perturb one rotation at a time, keep improvements.
        for step in 0..400 {
            let idx = rng.gen_range(1..16);
            let angle = 0.3 * (1.0 - step as f64 / 400.0) + 0.01;
            let axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if axis.norm() < 1e-3 {
                continue;
            }
            let delta = UnitQuaternion::from_scaled_axis(axis.normalize() * angle)
                .to_rotation_matrix()
                .into_inner();
            let old = rots[idx];
            rots[idx] = delta * old;
            let s = cross_separation(&faces, &rots);
            if s > score {
                score = s;
            } else {
                rots[idx] = old;
            }
        }
        if best.as_ref().map_or(true, |(_, b)| score > *b) {
            best = Some((rots, score));
        }
    }
    let (rots, _) = best.expect("at least one restart");
    let frame = DodecahedralFrame {
        faces,
        rotations: std::array::from_fn(|c| to_array(&rots[c])),
        separation_c: 0.0,
    };
    let c = frame.verify_separation();
    if c < floor {
        return Err(WaveError::FrameSeparation { achieved: c, floor });
    }
    Ok(DodecahedralFrame {
        separation_c: c,
        ..frame
    })
}

/// Load the frozen rotation family and re-verify its separation bound.
pub fn init_frame() -> Result<DodecahedralFrame, WaveError> {
    let frame: DodecahedralFrame = serde_json::from_str(include_str!("../data/frame.json"))
        .map_err(|e| WaveError::FrameFile(e.to_string()))?;
    let c = frame.verify_separation();
    if c + 1e-12 < frame.separation_c {
        return Err(WaveError::FrameSeparation {
            achieved: c,
            floor: frame.separation_c,
        });
    }
    Ok(frame)
}
