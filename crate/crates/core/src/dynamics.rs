//! The classical A-baker map with arbitrary block permutation, good-region
//! bookkeeping, and the quantitative correspondence between the quantized
//! block-phase baker evolution and the classical trajectory.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::fmt17;
use crate::operators::{tilde_baker, tilde_block_parameters, BlockPermutation, ModMultSpec, Sign};
use crate::states::{
    distance_up_to_phase, husimi, torus_coherent_state, CoherentParams, StateVector,
};

/// A point of the torus phase space, coordinates reduced mod 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        PhasePoint { x: x.rem_euclid(1.0), p: p.rem_euclid(1.0) }
    }

    /// Flat torus distance: per-coordinate minimum over unit wraps.
    pub fn torus_distance(&self, other: &PhasePoint) -> f64 {
        let dx = (self.x - other.x).abs();
        let dx = dx.min(1.0 - dx);
        let dp = (self.p - other.p).abs();
        let dp = dp.min(1.0 - dp);
        (dx * dx + dp * dp).sqrt()
    }
}

/// One step of the classical A-baker map with block permutation Pi:
/// with `l = floor(A x)`, the image is `(A x - l, (p + Pi(l)) / A)`. For the
/// cyclic shift k this is `Pi(l) = (l - k) mod A`.
pub fn classical_step(a: usize, perm: &BlockPermutation, z: PhasePoint) -> PhasePoint {
    let ax = a as f64 * z.x;
    let l = (ax.floor() as usize).min(a - 1);
    let x = ax - l as f64;
    let p = (z.p + perm.apply(l, a) as f64) / a as f64;
    PhasePoint { x, p }
}

/// `[z0, S(z0), S^2(z0), ...]` of length steps + 1.
pub fn classical_orbit(
    a: usize,
    perm: &BlockPermutation,
    z0: PhasePoint,
    steps: usize,
) -> Vec<PhasePoint> {
    let mut orbit = Vec::with_capacity(steps + 1);
    orbit.push(z0);
    let mut z = z0;
    for _ in 0..steps {
        z = classical_step(a, perm, z);
        orbit.push(z);
    }
    orbit
}

/// The region away from the map discontinuities: |x - k/A| > delta for all
/// k = 0..A and p in (gamma, 1 - gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodRegionSpec {
    pub a: usize,
    pub delta: f64,
    pub gamma: f64,
}

impl GoodRegionSpec {
    pub fn new(a: usize, delta: f64, gamma: f64) -> Result<Self> {
        if a == 0 {
            return Err(Error::InvalidParameter("A must be >= 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0 / (2.0 * a as f64)) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must lie in (0, 1/(2A))"
            )));
        }
        if !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (0, 1/2)")));
        }
        Ok(GoodRegionSpec { a, delta, gamma })
    }

    /// Margins used by the acceptance sweeps: delta = 1/(4A), gamma = 1/4.
    pub fn defaults(a: usize) -> Self {
        GoodRegionSpec { a, delta: 1.0 / (4.0 * a as f64), gamma: 0.25 }
    }
}

pub fn in_good_region(spec: &GoodRegionSpec, z: PhasePoint) -> bool {
    for k in 0..=spec.a {
        if (z.x - k as f64 / spec.a as f64).abs() <= spec.delta {
            return false;
        }
    }
    z.p > spec.gamma && z.p < 1.0 - spec.gamma
}

/// Which coherent state the evolved state is compared against: the one at
/// the classical image, or at the O(1/D)-corrected center
/// `(A x0 - l + beta_l A / D, (p0 + j)/A - alpha_l / D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    Classical,
    Shifted,
}

#[derive(Debug, Clone)]
pub struct SemiclassicalReport {
    pub d: usize,
    /// Distance up to a global phase between the evolved state and the
    /// target coherent state; lies in [0, 2].
    pub error: f64,
    pub classical_target: PhasePoint,
    pub shifted_target: PhasePoint,
    pub husimi_peak: Option<PhasePoint>,
    /// False when z0 fell outside the default good region, in which case
    /// diffraction effects are expected and the error is not meaningful.
    pub good_region: bool,
}

/// Evolve the coherent state at z0 by the cyclic-shift baker variant:
/// returns B~_A^{(k)} applied to `Psi_{z0, sigma}`.
pub fn evolve_coherent_state(
    spec: &ModMultSpec,
    k: usize,
    z0: PhasePoint,
    sigma: f64,
) -> Result<StateVector> {
    let d = spec.d();
    let psi = torus_coherent_state(&CoherentParams::new(z0.x, z0.p, sigma, d)?)?;
    let b = tilde_baker(spec, k)?;
    StateVector::new(b.mul_vec(psi.amplitudes()))?.normalized()
}

/// Quantitative semiclassical check: evolve the coherent state at z0 under
/// the baker variant, compare against the coherent state at the classical
/// (or shifted) image with squeezing sigma/A^2, and locate the Husimi peak
/// of the evolved state when a grid is requested.
pub fn semiclassical_run(
    spec: &ModMultSpec,
    k: usize,
    z0: PhasePoint,
    sigma: f64,
    target: TargetMode,
    husimi_grid: Option<(usize, usize)>,
) -> Result<(SemiclassicalReport, StateVector)> {
    let a = spec.a as usize;
    let d = spec.d();
    let dd = d as f64;
    let evolved = evolve_coherent_state(spec, k, z0, sigma)?;

    let perm = BlockPermutation::CyclicShift(k);
    let classical_target = classical_step(a, &perm, z0);
    let l = ((a as f64 * z0.x).floor() as usize).min(a - 1);
    let (_, phases) = tilde_block_parameters(spec, k)?;
    let ph = phases[l];
    let shifted_target = PhasePoint::new(
        classical_target.x + ph.beta * a as f64 / dd,
        classical_target.p - ph.alpha / dd,
    );

    let center = match target {
        TargetMode::Classical => classical_target,
        TargetMode::Shifted => shifted_target,
    };
    let target_state = torus_coherent_state(&CoherentParams::new(
        center.x,
        center.p,
        sigma / (a * a) as f64,
        d,
    )?)?;
    let error = distance_up_to_phase(&evolved, &target_state)?;

    let husimi_peak = match husimi_grid {
        Some((nx, np)) => {
            let grid = husimi(&evolved, nx, np, sigma)?;
            let (x, p) = grid.argmax();
            Some(PhasePoint::new(x, p))
        }
        None => None,
    };

    let good_region = in_good_region(&GoodRegionSpec::defaults(a), z0);
    let report = SemiclassicalReport {
        d,
        error,
        classical_target,
        shifted_target,
        husimi_peak,
        good_region,
    };
    Ok((report, evolved))
}

pub fn semiclassical_error(
    spec: &ModMultSpec,
    k: usize,
    z0: PhasePoint,
    sigma: f64,
    target: TargetMode,
    husimi_grid: Option<(usize, usize)>,
) -> Result<SemiclassicalReport> {
    Ok(semiclassical_run(spec, k, z0, sigma, target, husimi_grid)?.0)
}

/// Semiclassical error against the classical target for each q in q_list,
/// everything else fixed; returns (D, error) rows in input order.
pub fn convergence_scan(
    a: u64,
    k: usize,
    sign: Sign,
    z0: PhasePoint,
    sigma: f64,
    q_list: &[u64],
) -> Result<Vec<(usize, f64)>> {
    if q_list.is_empty() {
        return Err(Error::InvalidParameter("q list must not be empty".into()));
    }
    q_list
        .par_iter()
        .map(|&q| {
            let spec = ModMultSpec::new(a, q, sign)?;
            let report =
                semiclassical_error(&spec, k, z0, sigma, TargetMode::Classical, None)?;
            Ok((spec.d(), report.error))
        })
        .collect()
}

/// Scan CSV: header `D,error`, one row per dimension.
pub fn write_scan_csv<W: Write>(rows: &[(usize, f64)], w: &mut W) -> Result<()> {
    writeln!(w, "D,error")?;
    for (d, err) in rows {
        writeln!(w, "{},{}", d, fmt17(*err))?;
    }
    Ok(())
}

/// Orbit CSV: header `t,x,p`.
pub fn write_orbit_csv<W: Write>(orbit: &[PhasePoint], w: &mut W) -> Result<()> {
    writeln!(w, "t,x,p")?;
    for (t, z) in orbit.iter().enumerate() {
        writeln!(w, "{},{},{}", t, fmt17(z.x), fmt17(z.p))?;
    }
    Ok(())
}

pub fn save_scan_csv(rows: &[(usize, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_scan_csv(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_single_step() {
        let z = classical_step(3, &BlockPermutation::CyclicShift(1), PhasePoint::new(0.5, 0.5));
        assert!((z.x - 0.5).abs() < 1e-15);
        assert!((z.p - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn left_branch_compresses_momentum() {
        let z = classical_step(2, &BlockPermutation::CyclicShift(0), PhasePoint::new(0.0, 0.8));
        assert_eq!(z.x, 0.0);
        assert_eq!(z.p, 0.4);
    }

    #[test]
    fn right_branch_hand_value() {
        let z = classical_step(2, &BlockPermutation::CyclicShift(0), PhasePoint::new(0.75, 0.5));
        assert!((z.x - 0.5).abs() < 1e-15);
        assert!((z.p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn orbit_matches_hand_iteration() {
        let orbit = classical_orbit(
            2,
            &BlockPermutation::CyclicShift(0),
            PhasePoint::new(1.0 / 3.0, 1.0 / 3.0),
            2,
        );
        assert_eq!(orbit.len(), 3);
        assert!((orbit[1].x - 2.0 / 3.0).abs() < 1e-15);
        assert!((orbit[1].p - 1.0 / 6.0).abs() < 1e-15);
        assert!((orbit[2].x - 1.0 / 3.0).abs() < 1e-14);
        assert!((orbit[2].p - 7.0 / 12.0).abs() < 1e-15);
        assert_eq!(classical_orbit(2, &BlockPermutation::CyclicShift(0), orbit[0], 0).len(), 1);
    }

    #[test]
    fn shift_and_explicit_permutation_agree() {
        for a in [2usize, 3, 5] {
            for k in 0..a {
                let explicit: Vec<usize> = (0..a).map(|l| (l + a - k) % a).collect();
                for i in 0..40 {
                    let z = PhasePoint::new(0.025 * i as f64, 0.7 - 0.01 * i as f64);
                    let s = classical_step(a, &BlockPermutation::CyclicShift(k), z);
                    let e =
                        classical_step(a, &BlockPermutation::Explicit(explicit.clone()), z);
                    assert_eq!(s, e);
                }
            }
        }
    }

    #[test]
    fn stretching_is_exactly_linear_on_dyadic_points() {
        // dyadic inputs in one branch: the image separations are exact
        let perm = BlockPermutation::CyclicShift(0);
        let (x1, x2) = (0.53125, 0.546875); // same branch of A = 2
        let (p1, p2) = (0.25, 0.375);
        let a = classical_step(2, &perm, PhasePoint::new(x1, p1));
        let b = classical_step(2, &perm, PhasePoint::new(x2, p2));
        assert_eq!((b.x - a.x).abs(), 2.0 * (x2 - x1));
        assert_eq!((b.p - a.p).abs(), (p2 - p1) / 2.0);
        // generic A stays within a couple of ulps
        let a3 = classical_step(3, &perm, PhasePoint::new(0.40, 0.23));
        let b3 = classical_step(3, &perm, PhasePoint::new(0.41, 0.29));
        assert!(((b3.x - a3.x) - 3.0 * 0.01).abs() < 1e-14);
        assert!(((b3.p - a3.p) - 0.06 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn good_region_examples() {
        let g = GoodRegionSpec::new(3, 0.05, 0.1).unwrap();
        assert!(in_good_region(&g, PhasePoint::new(0.5, 0.5)));
        assert!(!in_good_region(&g, PhasePoint::new(1.0 / 3.0, 0.5)));
        let g2 = GoodRegionSpec::new(2, 0.1, 0.2).unwrap();
        assert!(!in_good_region(&g2, PhasePoint::new(0.25, 0.1)));
        assert!(GoodRegionSpec::new(3, 0.2, 0.1).is_err()); // delta >= 1/(2A)
    }

    #[test]
    fn identity_multiplier_evolves_exactly() {
        let spec = ModMultSpec::new(1, 8, Sign::Plus).unwrap();
        let report = semiclassical_error(
            &spec,
            0,
            PhasePoint::new(0.3, 0.4),
            1.0,
            TargetMode::Classical,
            None,
        )
        .unwrap();
        assert!(report.error < 1e-10, "error {}", report.error);
    }

    #[test]
    fn shifted_target_is_at_least_as_close() {
        let spec = ModMultSpec::new(2, 32, Sign::Plus).unwrap();
        let z0 = PhasePoint::new(0.3, 0.4);
        let classical =
            semiclassical_error(&spec, 0, z0, 1.0, TargetMode::Classical, None).unwrap();
        let shifted = semiclassical_error(&spec, 0, z0, 1.0, TargetMode::Shifted, None).unwrap();
        assert!(shifted.error <= classical.error);
        assert!(classical.good_region);
    }

    #[test]
    fn scan_errors_decrease_strictly() {
        let rows = convergence_scan(
            2,
            0,
            Sign::Plus,
            PhasePoint::new(0.3, 0.4),
            1.0,
            &[16, 64, 256],
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].1 > rows[1].1 && rows[1].1 > rows[2].1, "{rows:?}");
    }

    #[test]
    fn scan_rejects_empty_input() {
        assert!(convergence_scan(2, 0, Sign::Plus, PhasePoint::new(0.3, 0.4), 1.0, &[]).is_err());
    }

    #[test]
    fn identity_scan_is_flat_zero() {
        let rows =
            convergence_scan(1, 0, Sign::Plus, PhasePoint::new(0.3, 0.4), 1.0, &[8, 16]).unwrap();
        for (_, err) in rows {
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn torus_distance_wraps() {
        let a = PhasePoint::new(0.05, 0.95);
        let b = PhasePoint::new(0.95, 0.05);
        assert!((a.torus_distance(&b) - (0.02f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn husimi_peak_tracks_the_classical_target() {
        for (a, q, k, x0, p0) in [
            (2u64, 32u64, 0usize, 0.3, 0.4),
            (5, 20, 2, 0.55, 0.6),
        ] {
            let spec = ModMultSpec::new(a, q, Sign::Plus).unwrap();
            let d = spec.d();
            let z0 = PhasePoint::new(x0, p0);
            let report =
                semiclassical_error(&spec, k, z0, 1.0, TargetMode::Classical, Some((d, d)))
                    .unwrap();
            assert!(report.good_region, "({a},{q},{k}) starts outside the good region");
            let peak = report.husimi_peak.unwrap();
            let dist = peak.torus_distance(&report.classical_target);
            let bound = 3.0 / (d as f64).sqrt();
            assert!(dist < bound, "({a},{q},{k}): peak off by {dist:.4} vs {bound:.4}");
        }
    }
}
