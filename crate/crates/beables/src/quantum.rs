//! Quantum reference point: singlet-state correlators and the `2*sqrt(2)`
//! ceiling they satisfy.
//!
//! Correlators are computed as genuine 4-dimensional density-matrix
//! traces, `E(da, db) = Tr[rho (sigma(da) ⊗ sigma(db))]`, with the closed
//! form `-cos(da - db)` checked in tests rather than assumed. Measurement
//! directions are planar, parametrized by a single angle in the x-z plane.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{CorrelatorTable, ModelError};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("side {side} has no measurement directions")]
    EmptyDirections { side: char },
    #[error("angle grid needs at least 2 points per side, got {resolution}")]
    ResolutionTooSmall { resolution: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The Tsirelson ceiling `2*sqrt(2)` for CHSH under quantum mechanics.
pub fn tsirelson_bound() -> f64 {
    2.0 * 2.0_f64.sqrt()
}

// ── Fixed-size complex linear algebra ───────────────────────────────────

type M2 = [[Complex64; 2]; 2];
type M4 = [[Complex64; 4]; 4];

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Planar spin observable `cos(theta) sigma_z + sin(theta) sigma_x`.
fn spin_along(theta: f64) -> M2 {
    let (s, c) = theta.sin_cos();
    [[re(c), re(s)], [re(s), re(-c)]]
}

fn kron(a: &M2, b: &M2) -> M4 {
    let mut out = [[Complex64::default(); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn mul4(a: &M4, b: &M4) -> M4 {
    let mut out = [[Complex64::default(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Complex64::default();
            for k in 0..4 {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn trace4(a: &M4) -> Complex64 {
    a[0][0] + a[1][1] + a[2][2] + a[3][3]
}

/// Density matrix of the singlet state `(|01> - |10>) / sqrt(2)`.
fn singlet_density() -> M4 {
    let s = 1.0 / 2.0_f64.sqrt();
    let psi = [re(0.0), re(s), re(-s), re(0.0)];
    let mut rho = [[Complex64::default(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = psi[i] * psi[j].conj();
        }
    }
    rho
}

// ── Directions and scenarios ────────────────────────────────────────────

/// A planar measurement direction, normalized to `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementDirection {
    angle: f64,
}

impl MeasurementDirection {
    pub fn new(angle: f64) -> Self {
        Self {
            angle: angle.rem_euclid(TAU),
        }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }
}

/// Singlet correlator for two planar directions, via the density-matrix
/// trace. The imaginary part of the trace is identically zero for this
/// observable and state.
pub fn singlet_correlator(da: MeasurementDirection, db: MeasurementDirection) -> f64 {
    let op = kron(&spin_along(da.angle()), &spin_along(db.angle()));
    trace4(&mul4(&singlet_density(), &op)).re
}

/// A finite set of planar directions per wing, measured on the singlet.
/// The induced correlator table has labels `a0, a1, ...` and `b0, ...` in
/// direction order and a single null context `c0`.
#[derive(Debug, Clone)]
pub struct QuantumScenario {
    directions_a: Vec<MeasurementDirection>,
    directions_b: Vec<MeasurementDirection>,
}

impl QuantumScenario {
    pub fn new(
        directions_a: Vec<MeasurementDirection>,
        directions_b: Vec<MeasurementDirection>,
    ) -> Result<Self, QuantumError> {
        if directions_a.is_empty() {
            return Err(QuantumError::EmptyDirections { side: 'a' });
        }
        if directions_b.is_empty() {
            return Err(QuantumError::EmptyDirections { side: 'b' });
        }
        Ok(Self {
            directions_a,
            directions_b,
        })
    }

    pub fn from_angles(angles_a: &[f64], angles_b: &[f64]) -> Result<Self, QuantumError> {
        Self::new(
            angles_a
                .iter()
                .map(|&a| MeasurementDirection::new(a))
                .collect(),
            angles_b
                .iter()
                .map(|&b| MeasurementDirection::new(b))
                .collect(),
        )
    }

    pub fn directions_a(&self) -> &[MeasurementDirection] {
        &self.directions_a
    }

    pub fn directions_b(&self) -> &[MeasurementDirection] {
        &self.directions_b
    }

    pub fn quantum_table(&self) -> Result<CorrelatorTable, QuantumError> {
        let a_labels: Vec<String> = (0..self.directions_a.len())
            .map(|i| format!("a{i}"))
            .collect();
        let b_labels: Vec<String> = (0..self.directions_b.len())
            .map(|i| format!("b{i}"))
            .collect();
        let mut entries = BTreeMap::new();
        for (i, &da) in self.directions_a.iter().enumerate() {
            for (j, &db) in self.directions_b.iter().enumerate() {
                entries.insert(
                    (a_labels[i].clone(), b_labels[j].clone(), "c0".to_owned()),
                    singlet_correlator(da, db),
                );
            }
        }
        Ok(CorrelatorTable::new(
            a_labels,
            b_labels,
            vec!["c0".to_owned()],
            entries,
            None,
        )?)
    }
}

/// Result of a grid scan: the best CHSH value found and the angles
/// `(a, a', b, b')` attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanResult {
    pub value: f64,
    pub angles: [f64; 4],
}

/// Maximum singlet CHSH over a uniform angle grid of the given resolution.
///
/// The correlator depends only on angle differences, so the first `a`
/// angle is pinned to 0; because a uniform grid over the full circle is
/// invariant under its own shifts, this loses nothing. The maximum
/// approaches `2*sqrt(2)` from below as the resolution grows and reaches
/// it whenever the grid contains the multiples of `pi / 4`.
pub fn tsirelson_gap_scan(resolution: usize) -> Result<ScanResult, QuantumError> {
    if resolution < 2 {
        return Err(QuantumError::ResolutionTooSmall { resolution });
    }
    let n = resolution;
    // e[k] = E(angles that differ by 2*pi*k/n), from the trace path.
    let zero = MeasurementDirection::new(0.0);
    let e: Vec<f64> = (0..n)
        .map(|k| singlet_correlator(MeasurementDirection::new(TAU * k as f64 / n as f64), zero))
        .collect();
    let diff = |x: usize, y: usize| e[(n + x - y) % n];

    let mut best = ScanResult {
        value: f64::NEG_INFINITY,
        angles: [0.0; 4],
    };
    for a2 in 1..n {
        for b1 in 0..n {
            let e1 = diff(0, b1);
            let e3 = diff(a2, b1);
            for b2 in (b1 + 1)..n {
                let e2 = diff(0, b2);
                let e4 = diff(a2, b2);
                let v1 = (e1 - e2).abs() + (e3 + e4).abs();
                let v2 = (e1 + e2).abs() + (e3 - e4).abs();
                let v = v1.max(v2);
                if v > best.value {
                    best = ScanResult {
                        value: v,
                        angles: [
                            0.0,
                            TAU * a2 as f64 / n as f64,
                            TAU * b1 as f64 / n as f64,
                            TAU * b2 as f64 / n as f64,
                        ],
                    };
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn dir(angle: f64) -> MeasurementDirection {
        MeasurementDirection::new(angle)
    }

    #[test]
    fn aligned_directions_anticorrelate_perfectly() {
        assert!((singlet_correlator(dir(0.0), dir(0.0)) + 1.0).abs() < 1e-12);
        assert!((singlet_correlator(dir(1.3), dir(1.3)) + 1.0).abs() < 1e-12);
        assert!(singlet_correlator(dir(0.0), dir(FRAC_PI_2)).abs() < 1e-12);
        let v = singlet_correlator(dir(0.0), dir(FRAC_PI_4));
        assert!((v + 2.0_f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_matches_closed_form_on_random_angles() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        for _ in 0..1000 {
            let da: f64 = rng.gen_range(0.0..TAU);
            let db: f64 = rng.gen_range(0.0..TAU);
            let traced = singlet_correlator(dir(da), dir(db));
            assert!((traced - (-(da - db).cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn correlator_depends_only_on_angle_difference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let da: f64 = rng.gen_range(0.0..TAU);
            let db: f64 = rng.gen_range(0.0..TAU);
            let shift: f64 = rng.gen_range(0.0..TAU);
            let base = singlet_correlator(dir(da), dir(db));
            let shifted = singlet_correlator(dir(da + shift), dir(db + shift));
            assert!((base - shifted).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_angles_reach_tsirelson() {
        let scenario =
            QuantumScenario::from_angles(&[0.0, FRAC_PI_2], &[FRAC_PI_4, 3.0 * FRAC_PI_4]).unwrap();
        let table = scenario.quantum_table().unwrap();
        let best = table.max_chsh().unwrap();
        assert!((best.value - tsirelson_bound()).abs() < 1e-9);
        // The singlet table cannot be written as f_A(a) * f_B(b) with
        // bounded factors; past the bound of 2 a residual must remain.
        assert!(table.product_form_deviation(1e-9).unwrap() > 1e-3);
    }

    #[test]
    fn random_scenarios_never_exceed_tsirelson() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10_000 {
            let angles: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
            let scenario = QuantumScenario::from_angles(&angles[..2], &angles[2..]).unwrap();
            let best = scenario.quantum_table().unwrap().max_chsh().unwrap();
            assert!(best.value <= tsirelson_bound() + 1e-9);
        }
    }

    #[test]
    fn scan_converges_from_below() {
        let coarse = tsirelson_gap_scan(8).unwrap();
        assert!(coarse.value <= tsirelson_bound() + 1e-12);
        let fine = tsirelson_gap_scan(64).unwrap();
        assert!(fine.value <= tsirelson_bound() + 1e-12);
        assert!((fine.value - tsirelson_bound()).abs() < 1e-3);
        assert!(fine.value + 1e-12 >= coarse.value);
        assert!(matches!(
            tsirelson_gap_scan(1),
            Err(QuantumError::ResolutionTooSmall { .. })
        ));
    }

    #[test]
    fn scan_angles_reproduce_value() {
        let r = tsirelson_gap_scan(16).unwrap();
        let [a1, a2, b1, b2] = r.angles;
        let e = |x: f64, y: f64| singlet_correlator(dir(x), dir(y));
        let v1 = (e(a1, b1) - e(a1, b2)).abs() + (e(a2, b1) + e(a2, b2)).abs();
        let v2 = (e(a1, b1) + e(a1, b2)).abs() + (e(a2, b1) - e(a2, b2)).abs();
        assert!((r.value - v1.max(v2)).abs() < 1e-9);
    }
}
