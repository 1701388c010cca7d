//! The single-qubit Clifford group modulo phase and the six stabilizer
//! states its columns produce.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::qlinalg::dense::{I, ONE, ZERO};
use crate::qlinalg::Mat2;

pub const NUM_CLIFFORDS: usize = 24;
pub const NUM_STABILIZER_STATES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitClifford {
    pub index: u8,
    pub matrix: Mat2,
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn mat_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn mat_trace(a: &Mat2) -> Complex64 {
    a[0][0] + a[1][1]
}

/// Scale so the first non-negligible entry (row-major) is real positive.
fn canonical_phase(m: &Mat2) -> Mat2 {
    let pivot = m
        .iter()
        .flatten()
        .copied()
        .find(|z| z.norm() > 1e-9)
        .unwrap_or(ONE);
    let phase = pivot.conj() / pivot.norm();
    let mut out = *m;
    for z in out.iter_mut().flatten() {
        *z *= phase;
    }
    out
}

fn mat_close(a: &Mat2, b: &Mat2) -> bool {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .all(|(x, y)| (x - y).norm() < 1e-9)
}

fn build_table() -> Vec<SingleQubitClifford> {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let h: Mat2 = [
        [Complex64::new(s2, 0.0), Complex64::new(s2, 0.0)],
        [Complex64::new(s2, 0.0), Complex64::new(-s2, 0.0)],
    ];
    let s: Mat2 = [[ONE, ZERO], [ZERO, I]];
    let generators = [h, s];
    let mut found: Vec<Mat2> = vec![[[ONE, ZERO], [ZERO, ONE]]];
    let mut head = 0;
    while head < found.len() {
        let current = found[head];
        head += 1;
        for g in &generators {
            let next = canonical_phase(&mat_mul(g, &current));
            if !found.iter().any(|m| mat_close(m, &next)) {
                found.push(next);
            }
        }
    }
    found
        .into_iter()
        .enumerate()
        .map(|(i, matrix)| SingleQubitClifford {
            index: i as u8,
            matrix,
        })
        .collect()
}

/// Breadth-first closure of `{H, S}` from the identity, deduplicated modulo
/// global phase.
pub fn clifford_table() -> &'static [SingleQubitClifford] {
    static TABLE: OnceLock<Vec<SingleQubitClifford>> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// Stabilizer states `|0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩`.
pub fn stabilizer_state(label: u8) -> [Complex64; 2] {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| Complex64::new(x, 0.0);
    match label {
        0 => [ONE, ZERO],
        1 => [ZERO, ONE],
        2 => [r(s2), r(s2)],
        3 => [r(s2), r(-s2)],
        4 => [r(s2), Complex64::new(0.0, s2)],
        5 => [r(s2), Complex64::new(0.0, -s2)],
        _ => panic!("stabilizer label {label} out of range"),
    }
}

/// `3|s⟩⟨s| − I`.
pub fn snapshot_factor(label: u8) -> Mat2 {
    let v = stabilizer_state(label);
    let mut m = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = v[r] * v[c].conj() * 3.0 - if r == c { ONE } else { ZERO };
        }
    }
    m
}

pub fn snapshot_factors() -> &'static [Mat2; NUM_STABILIZER_STATES] {
    static F: OnceLock<[Mat2; NUM_STABILIZER_STATES]> = OnceLock::new();
    F.get_or_init(|| std::array::from_fn(|l| snapshot_factor(l as u8)))
}

fn build_outcome_labels() -> [[u8; 2]; NUM_CLIFFORDS] {
    let table = clifford_table();
    let mut out = [[0u8; 2]; NUM_CLIFFORDS];
    for (c, cl) in table.iter().enumerate() {
        let ud = mat_adjoint(&cl.matrix);
        for b in 0..2 {
            let state = [ud[0][b], ud[1][b]];
            out[c][b] = (0..NUM_STABILIZER_STATES as u8)
                .find(|&l| {
                    let s = stabilizer_state(l);
                    let overlap = s[0].conj() * state[0] + s[1].conj() * state[1];
                    (overlap.norm_sqr() - 1.0).abs() < 1e-9
                })
                .expect("u†|b⟩ is always a stabilizer state");
        }
    }
    out
}

/// Label of the post-measurement state `u†|b⟩`.
pub fn outcome_label(clifford: u8, bit: u8) -> u8 {
    static T: OnceLock<[[u8; 2]; NUM_CLIFFORDS]> = OnceLock::new();
    T.get_or_init(build_outcome_labels)[clifford as usize][bit as usize]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::Pauli;

    #[test]
    fn table_has_24_unitaries() {
        let t = clifford_table();
        assert_eq!(t.len(), NUM_CLIFFORDS);
        for c in t {
            let p = mat_mul(&mat_adjoint(&c.matrix), &c.matrix);
            assert!(mat_close(&p, &[[ONE, ZERO], [ZERO, ONE]]));
        }
        assert!(mat_close(&t[0].matrix, &[[ONE, ZERO], [ZERO, ONE]]));
    }

    #[test]
    fn closed_under_multiplication() {
        let t = clifford_table();
        for a in t {
            for b in t {
                let p = canonical_phase(&mat_mul(&a.matrix, &b.matrix));
                assert!(t.iter().any(|c| mat_close(&c.matrix, &p)));
            }
        }
    }

    #[test]
    fn conjugation_maps_paulis_to_signed_paulis() {
        let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
        for c in clifford_table() {
            for p in paulis {
                let img = mat_mul(&mat_mul(&c.matrix, &p.matrix()), &mat_adjoint(&c.matrix));
                let hit = paulis.iter().any(|q| {
                    let m = q.matrix();
                    let neg = [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]];
                    mat_close(&img, &m) || mat_close(&img, &neg)
                });
                assert!(hit);
            }
        }
    }

    #[test]
    fn factors_have_trace_one_and_spectrum_two_minus_one() {
        for l in 0..6u8 {
            let f = snapshot_factor(l);
            assert!((mat_trace(&f) - ONE).norm() < 1e-12);
            // eigenvalues of a Hermitian 2x2 from trace and determinant
            let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
            assert!((det + 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn every_label_is_reached_uniformly() {
        let mut counts = [0; NUM_STABILIZER_STATES];
        for c in 0..NUM_CLIFFORDS as u8 {
            for b in 0..2 {
                counts[outcome_label(c, b) as usize] += 1;
            }
        }
        assert_eq!(counts, [8; NUM_STABILIZER_STATES]);
        for c in 0..NUM_CLIFFORDS as u8 {
            let (a, b) = (outcome_label(c, 0), outcome_label(c, 1));
            assert_eq!(a / 2, b / 2, "outcomes of one basis are orthogonal");
        }
    }
}
