//! Finite-dimensional object⊗apparatus measurement models: unitary pointer
//! evolution, sector probabilities, the induced positive operators on the
//! object space, and the grid bridge that reproduces outcome statistics from
//! particle positions alone.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Hard cap on the product-space dimension for the dense algebra.
pub const DIMENSION_CAP: usize = 1 << 12;

#[derive(Clone, Debug)]
pub struct MeasurementModel {
    pub dim_object: usize,
    pub dim_apparatus: usize,
    /// Hermitian Hamiltonian on the product space (object-major index
    /// `x·L + y`).
    pub hamiltonian: CMatrix,
    /// Apparatus ready state (unit vector, length L).
    pub ready_state: Vec<Complex64>,
    /// Pairwise-disjoint apparatus index sets, one per outcome.
    pub pointer_sectors: Vec<Vec<usize>>,
    /// Result labels r_α (distinct).
    pub labels: Vec<f64>,
    /// Experiment duration t1 − t0.
    pub duration: f64,
    pub hbar: f64,
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        let (k, l) = (self.dim_object, self.dim_apparatus);
        if k < 2 || l < 2 {
            return Err(Error::Config("object and apparatus need dimension >= 2".into()));
        }
        if k * l > DIMENSION_CAP {
            return Err(Error::Config(format!(
                "product dimension {} exceeds the cap {DIMENSION_CAP}",
                k * l
            )));
        }
        if self.hamiltonian.dim() != k * l {
            return Err(Error::Config(format!(
                "hamiltonian dimension {} does not match {k}x{l}",
                self.hamiltonian.dim()
            )));
        }
        if self.hamiltonian.hermiticity_defect() > 1e-12 * self.hamiltonian.one_norm().max(1.0) {
            return Err(Error::Domain("hamiltonian must be Hermitian within 1e-12".into()));
        }
        if self.ready_state.len() != l {
            return Err(Error::Config("ready state length must match the apparatus".into()));
        }
        let norm: f64 = self.ready_state.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("ready state norm² = {norm}, expected 1")));
        }
        if self.pointer_sectors.len() != self.labels.len() || self.pointer_sectors.is_empty() {
            return Err(Error::Config("need one label per pointer sector".into()));
        }
        let mut seen = vec![false; l];
        for sector in &self.pointer_sectors {
            for &y in sector {
                if y >= l {
                    return Err(Error::Config(format!("sector index {y} out of range")));
                }
                if seen[y] {
                    return Err(Error::Config(format!("sector index {y} appears twice")));
                }
                seen[y] = true;
            }
        }
        for (i, a) in self.labels.iter().enumerate() {
            for b in &self.labels[i + 1..] {
                if (a - b).abs() < 1e-12 {
                    return Err(Error::Config("result labels must be distinct".into()));
                }
            }
        }
        if self.duration < 0.0 || !(self.hbar > 0.0) {
            return Err(Error::Domain("need duration >= 0 and hbar > 0".into()));
        }
        Ok(())
    }

    /// Sectors jointly cover every apparatus index.
    pub fn is_exhaustive(&self) -> bool {
        let covered: usize = self.pointer_sectors.iter().map(|s| s.len()).sum();
        covered == self.dim_apparatus
    }

    /// e^{−iH(t1−t0)/ħ} on the product space.
    pub fn propagator(&self) -> Result<CMatrix> {
        self.hamiltonian
            .scale(Complex64::new(0.0, -self.duration / self.hbar))
            .expm()
    }
}

/// Evolve ψ⊗φ through the model; returns the final product-space vector.
pub fn evolve_model(model: &MeasurementModel, psi_object: &[Complex64]) -> Result<Vec<Complex64>> {
    model.validate()?;
    if psi_object.len() != model.dim_object {
        return Err(Error::Domain(format!(
            "object state has length {}, model expects {}",
            psi_object.len(),
            model.dim_object
        )));
    }
    let norm: f64 = psi_object.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("object state norm² = {norm}, expected 1")));
    }
    let l = model.dim_apparatus;
    let mut joint = vec![Complex64::default(); model.dim_object * l];
    for (x, a) in psi_object.iter().enumerate() {
        for (y, b) in model.ready_state.iter().enumerate() {
            joint[x * l + y] = a * b;
        }
    }
    Ok(model.propagator()?.mul_vec(&joint))
}

/// Probability that the apparatus configuration lands in sector α:
/// Σ_x Σ_{y∈S_α} |Ψ(x,y)|².
pub fn pointer_probability(model: &MeasurementModel, joint: &[Complex64], alpha: usize) -> f64 {
    let l = model.dim_apparatus;
    let mut p = 0.0;
    for x in 0..model.dim_object {
        for &y in &model.pointer_sectors[alpha] {
            p += joint[x * l + y].norm_sqr();
        }
    }
    p
}

/// Positive operators on the object space with outcome labels.
#[derive(Clone, Debug)]
pub struct Povm {
    pub elements: Vec<CMatrix>,
    pub labels: Vec<f64>,
}

impl Povm {
    /// Hermiticity, positivity, and (for exhaustive sector families)
    /// completeness, all at the stated tolerances.
    pub fn validate(&self, exhaustive: bool) -> Result<()> {
        let dim = self.elements[0].dim();
        let mut sum = CMatrix::zeros(dim);
        for e in &self.elements {
            if e.hermiticity_defect() > 1e-10 {
                return Err(Error::Domain("POVM element is not Hermitian within 1e-10".into()));
            }
            let min_eig = e
                .hermitian_eigenvalues()?
                .first()
                .copied()
                .unwrap_or(0.0);
            if min_eig < -1e-10 {
                return Err(Error::Domain(format!(
                    "POVM element has negative eigenvalue {min_eig}"
                )));
            }
            sum = sum.add(e);
        }
        if exhaustive {
            let defect = sum.sub(&CMatrix::identity(dim)).max_abs();
            if defect > 1e-10 {
                return Err(Error::Domain(format!(
                    "POVM completeness defect {defect} exceeds 1e-10"
                )));
            }
        }
        Ok(())
    }

    /// ⟨ψ|E_α|ψ⟩.
    pub fn probability(&self, alpha: usize, psi: &[Complex64]) -> f64 {
        let e = &self.elements[alpha];
        let ev = e.mul_vec(psi);
        psi.iter()
            .zip(&ev)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

/// Contract the apparatus out of the evolved projector: E_α = Σ_{y∈S_α}
/// B_y†B_y with B_y[x,x'] = Σ_{y'} U[(x,y),(x',y')]·φ(y').
pub fn extract_povm(model: &MeasurementModel) -> Result<Povm> {
    model.validate()?;
    let u = model.propagator()?;
    let (k, l) = (model.dim_object, model.dim_apparatus);
    // B_y for all y at once: columns indexed by x', rows by (x, y).
    let mut b = vec![CMatrix::zeros(k); l];
    for y in 0..l {
        for x in 0..k {
            for xp in 0..k {
                let mut acc = Complex64::default();
                for (yp, phi) in model.ready_state.iter().enumerate() {
                    acc += u[(x * l + y, xp * l + yp)] * phi;
                }
                b[y][(x, xp)] = acc;
            }
        }
    }
    let elements = model
        .pointer_sectors
        .iter()
        .map(|sector| {
            let mut e = CMatrix::zeros(k);
            for &y in sector {
                e = e.add(&b[y].adjoint().mul(&b[y]));
            }
            e
        })
        .collect();
    Ok(Povm {
        elements,
        labels: model.labels.clone(),
    })
}

/// Either the self-adjoint observable Σ r_α E_α of a projective family, or
/// the worst projection defect ‖E² − E‖ that disqualifies it.
#[derive(Clone, Debug)]
pub enum ProjectiveOutcome {
    Projective {
        observable: CMatrix,
        eigenvalues: Vec<f64>,
    },
    NonProjective {
        max_defect: f64,
    },
}

pub fn projective_observable(povm: &Povm) -> Result<ProjectiveOutcome> {
    let mut max_defect: f64 = 0.0;
    for e in &povm.elements {
        let defect = e.mul(e).sub(e).max_abs();
        max_defect = max_defect.max(defect);
    }
    if max_defect > 1e-10 {
        return Ok(ProjectiveOutcome::NonProjective { max_defect });
    }
    let dim = povm.elements[0].dim();
    let mut observable = CMatrix::zeros(dim);
    for (e, &r) in povm.elements.iter().zip(&povm.labels) {
        observable = observable.add(&e.scale(Complex64::new(r, 0.0)));
    }
    let eigenvalues = observable.hermitian_eigenvalues()?;
    Ok(ProjectiveOutcome::Projective {
        observable,
        eigenvalues,
    })
}

/// Build H = Σ_α |α⟩⟨α| ⊗ G_α: each object basis state drives its own
/// Hermitian apparatus generator, the textbook idealization of a pointer
/// coupling with predictable outcomes.
pub fn model_from_pointer_coupling(
    generators: Vec<CMatrix>,
    ready_state: Vec<Complex64>,
    pointer_sectors: Vec<Vec<usize>>,
    labels: Vec<f64>,
    duration: f64,
    hbar: f64,
) -> Result<MeasurementModel> {
    let k = generators.len();
    if k < 2 {
        return Err(Error::Config("need one generator per object basis state (>= 2)".into()));
    }
    let l = ready_state.len();
    if generators.iter().any(|g| g.dim() != l) {
        return Err(Error::Config("generators must act on the apparatus space".into()));
    }
    let mut h = CMatrix::zeros(k * l);
    for (alpha, g) in generators.iter().enumerate() {
        for y in 0..l {
            for yp in 0..l {
                h[(alpha * l + y, alpha * l + yp)] = g[(y, yp)];
            }
        }
    }
    let model = MeasurementModel {
        dim_object: k,
        dim_apparatus: l,
        hamiltonian: h,
        ready_state,
        pointer_sectors,
        labels,
        duration,
        hbar,
    };
    model.validate()?;
    Ok(model)
}

/// The controlled-flip model: object |0⟩ leaves the apparatus alone, |1⟩
/// rotates the ready pointer to the opposite basis state in `duration`.
pub fn cnot_model(duration: f64, hbar: f64) -> MeasurementModel {
    let c = |re: f64| Complex64::new(re, 0.0);
    // G1 = (πħ/t)·(I − X)/2 exponentiates to the flip.
    let scale = std::f64::consts::PI * hbar / duration;
    let g0 = CMatrix::zeros(2);
    let g1 = CMatrix::from_rows(
        2,
        vec![
            c(0.5 * scale),
            c(-0.5 * scale),
            c(-0.5 * scale),
            c(0.5 * scale),
        ],
    )
    .expect("2x2");
    model_from_pointer_coupling(
        vec![g0, g1],
        vec![c(1.0), c(0.0)],
        vec![vec![0], vec![1]],
        vec![1.0, -1.0],
        duration,
        hbar,
    )
    .expect("the flip model is valid")
}

/// Weak pointer coupling: |1⟩ rotates the pointer only by `angle`, so the
/// induced operators have eigenvalues strictly inside (0, 1).
pub fn weak_coupling_model(angle: f64, duration: f64, hbar: f64) -> MeasurementModel {
    let c = |re: f64| Complex64::new(re, 0.0);
    let scale = angle * hbar / duration;
    let g0 = CMatrix::zeros(2);
    // Generator ∝ Y rotates |0⟩ toward |1⟩ by `angle` over the duration.
    let g1 = CMatrix::from_rows(
        2,
        vec![
            c(0.0),
            Complex64::new(0.0, -0.5 * scale),
            Complex64::new(0.0, 0.5 * scale),
            c(0.0),
        ],
    )
    .expect("2x2");
    model_from_pointer_coupling(
        vec![g0, g1],
        vec![c(1.0), c(0.0)],
        vec![vec![0], vec![1]],
        vec![1.0, -1.0],
        duration,
        hbar,
    )
    .expect("the weak model is valid")
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1 = uniform(rng);
    if u1 == 0.0 {
        u1 = f64::MIN_POSITIVE;
    }
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random normalized complex vector.
pub fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Randomized measurement model: Gaussian Hermitian Hamiltonian, random ready
/// state, and an exhaustive partition of the apparatus basis into sectors.
pub fn random_model(
    dim_object: usize,
    dim_apparatus: usize,
    sectors: usize,
    duration: f64,
    hbar: f64,
    seed: u64,
) -> Result<MeasurementModel> {
    if sectors < 2 || sectors > dim_apparatus {
        return Err(Error::Config("need 2 <= sectors <= apparatus dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dim_object * dim_apparatus;
    let mut h = CMatrix::zeros(n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(standard_normal(&mut rng), 0.0);
        for j in i + 1..n {
            let v = Complex64::new(
                0.5 * standard_normal(&mut rng),
                0.5 * standard_normal(&mut rng),
            );
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    let ready_state = random_state(dim_apparatus, &mut rng);
    // Round-robin partition keeps every sector nonempty.
    let mut pointer_sectors = vec![Vec::new(); sectors];
    for y in 0..dim_apparatus {
        pointer_sectors[y % sectors].push(y);
    }
    let labels = (0..sectors).map(|i| i as f64).collect();
    let model = MeasurementModel {
        dim_object,
        dim_apparatus,
        hamiltonian: h,
        ready_state,
        pointer_sectors,
        labels,
        duration,
        hbar,
    };
    model.validate()?;
    Ok(model)
}

/// Serialized form of a model: dense matrices as row-major (re, im) pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementModelFile {
    pub dim_object: usize,
    pub dim_apparatus: usize,
    /// Row-major, 2·(K·L)² floats.
    pub hamiltonian: Vec<f64>,
    /// 2·L floats.
    pub ready_state: Vec<f64>,
    pub pointer_sectors: Vec<Vec<usize>>,
    pub labels: Vec<f64>,
    pub duration: f64,
    pub hbar: f64,
}

impl MeasurementModelFile {
    pub fn from_model(model: &MeasurementModel) -> Self {
        let flat = |v: &[Complex64]| -> Vec<f64> {
            v.iter().flat_map(|a| [a.re, a.im]).collect()
        };
        Self {
            dim_object: model.dim_object,
            dim_apparatus: model.dim_apparatus,
            hamiltonian: flat(model.hamiltonian.data()),
            ready_state: flat(&model.ready_state),
            pointer_sectors: model.pointer_sectors.clone(),
            labels: model.labels.clone(),
            duration: model.duration,
            hbar: model.hbar,
        }
    }

    pub fn into_model(self) -> Result<MeasurementModel> {
        let unflat = |v: &[f64]| -> Vec<Complex64> {
            v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
        };
        let n = self.dim_object * self.dim_apparatus;
        let model = MeasurementModel {
            dim_object: self.dim_object,
            dim_apparatus: self.dim_apparatus,
            hamiltonian: CMatrix::from_rows(n, unflat(&self.hamiltonian))?,
            ready_state: unflat(&self.ready_state),
            pointer_sectors: self.pointer_sectors,
            labels: self.labels,
            duration: self.duration,
            hbar: self.hbar,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Configuration of the position-only outcome experiment: a 2-D grid wave
/// with the object on the x axis and the pointer on the y axis, one pointer
/// packet per outcome.
#[derive(Clone, Debug)]
pub struct BornBridgeSpec {
    /// Outcome amplitudes c_α (need not be normalized; they will be).
    pub amplitudes: Vec<Complex64>,
    /// Pointer packet centers along y, one per outcome, pairwise separated.
    pub pointer_centers: Vec<f64>,
    pub pointer_sigma: f64,
    /// Object packet centers along x (same length as `amplitudes`).
    pub object_centers: Vec<f64>,
    pub object_sigma: f64,
    /// Lattice points per axis (power of two) and extents.
    pub points: usize,
    pub extent: f64,
    /// Free-flight time after the interaction and solver step.
    pub t_flight: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    /// Trajectory count, integration step, and the sampler seed.
    pub n_trajectories: usize,
    pub dt_traj: f64,
    pub seed: u64,
}

/// Sector statistics gathered from trajectory endpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BornReport {
    /// Observed fraction per outcome.
    pub frequencies: Vec<f64>,
    /// Born weights |c_α|².
    pub expected: Vec<f64>,
    /// Raw endpoint counts per outcome.
    pub counts: Vec<usize>,
    /// Trajectories that stayed inside the domain and were counted.
    pub n_effective: usize,
    /// 3σ binomial half-widths around the expected fractions.
    pub three_sigma: Vec<f64>,
    /// Largest packet mass found outside its own sector at t0.
    pub sector_overlap_mass: f64,
}

/// Sample the post-interaction wave Σ c_α ψ_α(x)·φ_α(y), free-fly it, and
/// count which y sector each trajectory ends in. Sector boundaries are the
/// midpoints between adjacent pointer centers.
pub fn born_from_trajectories(spec: &BornBridgeSpec) -> Result<BornReport> {
    use crate::grid::{make_grid, Boundary};
    use crate::potential::PotentialSpec;
    use crate::solver::{evolve, Method};
    use crate::trajectory::{propagate_ensemble, sample_initial, PropagateOptions, SampleFlag};
    use crate::wavefunction::WaveFunction;
    use std::sync::Arc;

    let outcomes = spec.amplitudes.len();
    if outcomes < 2
        || spec.pointer_centers.len() != outcomes
        || spec.object_centers.len() != outcomes
    {
        return Err(Error::Config(
            "need >= 2 outcomes with one pointer and object center each".into(),
        ));
    }
    let grid = Arc::new(make_grid(
        1,
        2,
        vec![spec.points, spec.points],
        vec![spec.extent, spec.extent],
        Boundary::Periodic,
    )?);
    let norm_c: f64 = spec.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let weights: Vec<Complex64> = spec
        .amplitudes
        .iter()
        .map(|a| a / norm_c.sqrt())
        .collect();

    // Ψ(x, y) = Σ_α c_α ψ_α(x) φ_α(y) with Gaussian factors.
    let gauss = |q: f64, center: f64, sigma: f64| -> f64 {
        (-(q - center) * (q - center) / (4.0 * sigma * sigma)).exp()
    };
    let mut amps = vec![Complex64::default(); grid.len()];
    let mut coords = [0.0f64; 2];
    for (p, amp) in amps.iter_mut().enumerate() {
        grid.point_coords(p, &mut coords);
        let (x, y) = (coords[0], coords[1]);
        let mut acc = Complex64::default();
        for alpha in 0..outcomes {
            acc += weights[alpha]
                * gauss(x, spec.object_centers[alpha], spec.object_sigma)
                * gauss(y, spec.pointer_centers[alpha], spec.pointer_sigma);
        }
        *amp = acc;
    }
    let psi = WaveFunction::new(grid.clone(), 1, amps, vec![1.0, 1.0], 1.0)?.normalize()?;

    // Sector membership by nearest pointer center; overlap = packet mass on
    // foreign sectors, which must be negligible for the counts to mean
    // anything.
    let sector_of = |y: f64| -> usize {
        spec.pointer_centers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - y).abs().partial_cmp(&(b.1 - y).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .expect("at least two outcomes")
    };
    let mut overlap: f64 = 0.0;
    {
        let cell = grid.cell_volume();
        for alpha in 0..outcomes {
            let mut foreign = 0.0;
            let mut total = 0.0;
            for p in 0..grid.len() {
                grid.point_coords(p, &mut coords);
                let y = coords[1];
                let m = (gauss(coords[0], spec.object_centers[alpha], spec.object_sigma)
                    * gauss(y, spec.pointer_centers[alpha], spec.pointer_sigma))
                .powi(2)
                    * cell;
                total += m;
                if sector_of(y) != alpha {
                    foreign += m;
                }
            }
            overlap = overlap.max(foreign / total);
        }
    }
    if overlap > 1e-6 {
        return Err(Error::Config(format!(
            "pointer sectors overlap with mass {overlap:.3e} (> 1e-6); separate the packets"
        )));
    }

    let record = evolve(
        &psi,
        &PotentialSpec::Zero,
        None,
        Method::SplitSpectral,
        spec.t_flight,
        spec.dt,
        spec.snapshot_stride,
    )?;
    let starts = sample_initial(&psi, spec.n_trajectories, spec.seed)?;
    let ensemble = propagate_ensemble(
        &record,
        &starts,
        spec.seed,
        PropagateOptions::new(spec.dt_traj),
    )?;
    let last = ensemble.times().len() - 1;
    let mut counts = vec![0usize; outcomes];
    let mut effective = 0usize;
    let flags = ensemble.flags_at(last);
    for i in 0..ensemble.len() {
        if flags[i] == SampleFlag::LeftDomain {
            continue;
        }
        let q = ensemble.position(last, i);
        counts[sector_of(q[1])] += 1;
        effective += 1;
    }
    if effective == 0 {
        return Err(Error::Degenerate("no trajectory survived to the readout".into()));
    }
    let expected: Vec<f64> = weights.iter().map(|c| c.norm_sqr()).collect();
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / effective as f64).collect();
    let three_sigma = expected
        .iter()
        .map(|&p| 3.0 * (p * (1.0 - p) / effective as f64).sqrt())
        .collect();
    Ok(BornReport {
        frequencies,
        expected,
        counts,
        n_effective: effective,
        three_sigma,
        sector_overlap_mass: overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_hamiltonian_leaves_the_product_state_alone() {
        let model = MeasurementModel {
            dim_object: 2,
            dim_apparatus: 3,
            hamiltonian: CMatrix::zeros(6),
            ready_state: vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)],
            pointer_sectors: vec![vec![0, 1], vec![2]],
            labels: vec![0.0, 1.0],
            duration: 1.0,
            hbar: 1.0,
        };
        let psi = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let joint = evolve_model(&model, &psi).unwrap();
        for x in 0..2 {
            for y in 0..3 {
                let expect = psi[x] * model.ready_state[y];
                assert!((joint[x * 3 + y] - expect).norm() < 1e-14);
            }
        }
        // H = 0 transfers no information: E_α ∝ I.
        let povm = extract_povm(&model).unwrap();
        povm.validate(true).unwrap();
        let weight: f64 = 0.36 + 0.64;
        let _ = weight;
        assert!((povm.elements[0][(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((povm.elements[0][(0, 1)]).norm() < 1e-12);
        match projective_observable(&povm).unwrap() {
            ProjectiveOutcome::NonProjective { .. } => {
                unreachable!("sector {{0,1}} carries the full ready mass here")
            }
            ProjectiveOutcome::Projective { eigenvalues, .. } => {
                // Full mass in sector 0 makes E_0 = I, E_1 = 0: projective.
                assert!(eigenvalues.iter().all(|l| l.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn evolution_is_linear_and_norm_preserving() {
        let model = cnot_model(1.0, 1.0);
        let a = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let b = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let ca = c(0.6, 0.0);
        let cb = c(0.0, 0.8);
        let combo: Vec<Complex64> = (0..2).map(|i| ca * a[i] + cb * b[i]).collect();
        let ja = evolve_model(&model, &a).unwrap();
        let jb = evolve_model(&model, &b).unwrap();
        let jc = evolve_model(&model, &combo).unwrap();
        for i in 0..4 {
            assert!((jc[i] - (ca * ja[i] + cb * jb[i])).norm() < 1e-12);
        }
        let norm: f64 = jc.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cnot_pointer_reads_the_object_basis_state() {
        let model = cnot_model(1.0, 1.0);
        let joint0 = evolve_model(&model, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((pointer_probability(&model, &joint0, 0) - 1.0).abs() < 1e-12);
        let joint1 = evolve_model(&model, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((pointer_probability(&model, &joint1, 1) - 1.0).abs() < 1e-12);
        // Born weights for a superposition.
        let amp = (0.5f64).sqrt();
        let joint = evolve_model(&model, &[c(amp, 0.0), c(amp, 0.0)]).unwrap();
        assert!((pointer_probability(&model, &joint, 0) - 0.5).abs() < 1e-12);
        assert!((pointer_probability(&model, &joint, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cnot_povm_is_the_projective_basis_measurement() {
        let model = cnot_model(1.0, 1.0);
        let povm = extract_povm(&model).unwrap();
        povm.validate(true).unwrap();
        for (alpha, expect_diag) in [(0usize, [1.0, 0.0]), (1usize, [0.0, 1.0])] {
            let e = &povm.elements[alpha];
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { expect_diag[i] } else { 0.0 };
                    assert!(
                        (e[(i, j)] - c(expect, 0.0)).norm() < 1e-10,
                        "E_{alpha}[{i}{j}]"
                    );
                }
            }
        }
        match projective_observable(&povm).unwrap() {
            ProjectiveOutcome::Projective {
                observable,
                eigenvalues,
            } => {
                assert!((observable[(0, 0)].re - 1.0).abs() < 1e-10);
                assert!((observable[(1, 1)].re + 1.0).abs() < 1e-10);
                assert!((eigenvalues[0] + 1.0).abs() < 1e-10);
                assert!((eigenvalues[1] - 1.0).abs() < 1e-10);
            }
            ProjectiveOutcome::NonProjective { max_defect } => {
                unreachable!("flip model must be projective, defect {max_defect}")
            }
        }
    }

    #[test]
    fn weak_coupling_gives_a_non_projective_family() {
        let model = weak_coupling_model(0.3, 1.0, 1.0);
        let povm = extract_povm(&model).unwrap();
        povm.validate(true).unwrap();
        for e in &povm.elements {
            let eig = e.hermitian_eigenvalues().unwrap();
            // Strictly inside (0, 1) on at least one eigenvalue.
            assert!(eig.iter().any(|&l| l > 1e-3 && l < 1.0 - 1e-3), "{eig:?}");
        }
        match projective_observable(&povm).unwrap() {
            ProjectiveOutcome::NonProjective { max_defect } => assert!(max_defect > 1e-3),
            ProjectiveOutcome::Projective { .. } => unreachable!("weak model is not projective"),
        }
    }

    #[test]
    fn povm_agrees_with_pointer_probabilities_on_random_states() {
        let model = cnot_model(0.7, 1.0);
        let povm = extract_povm(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let psi = random_state(2, &mut rng);
            let joint = evolve_model(&model, &psi).unwrap();
            for alpha in 0..2 {
                let direct = pointer_probability(&model, &joint, alpha);
                let via_povm = povm.probability(alpha, &psi);
                assert!((direct - via_povm).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn random_models_satisfy_the_povm_algebra() {
        for seed in 0..5u64 {
            let model = random_model(3, 4, 3, 0.9, 1.0, seed).unwrap();
            let povm = extract_povm(&model).unwrap();
            povm.validate(true).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            for _ in 0..20 {
                let psi = random_state(3, &mut rng);
                let joint = evolve_model(&model, &psi).unwrap();
                let total: f64 = (0..3)
                    .map(|alpha| pointer_probability(&model, &joint, alpha))
                    .sum();
                assert!((total - 1.0).abs() < 1e-10);
                for alpha in 0..3 {
                    let diff = (pointer_probability(&model, &joint, alpha)
                        - povm.probability(alpha, &psi))
                    .abs();
                    assert!(diff < 1e-10);
                }
            }
        }
    }

    #[test]
    fn perfect_measurements_have_no_cross_sector_mass() {
        let model = cnot_model(1.0, 1.0);
        for (alpha, basis) in [(0usize, [1.0, 0.0]), (1usize, [0.0, 1.0])] {
            let joint =
                evolve_model(&model, &[c(basis[0], 0.0), c(basis[1], 0.0)]).unwrap();
            for other in 0..2 {
                if other == alpha {
                    continue;
                }
                let mass = pointer_probability(&model, &joint, other);
                assert!(mass < 1e-8, "cross-sector mass {mass}");
            }
        }
    }

    #[test]
    fn model_file_round_trips() {
        let model = weak_coupling_model(0.4, 1.3, 1.0);
        let file = MeasurementModelFile::from_model(&model);
        let text = serde_json::to_string(&file).unwrap();
        let back: MeasurementModelFile = serde_json::from_str(&text).unwrap();
        let restored = back.into_model().unwrap();
        assert_eq!(restored.hamiltonian, model.hamiltonian);
        assert_eq!(restored.labels, model.labels);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let model = MeasurementModel {
            dim_object: 1 << 7,
            dim_apparatus: 1 << 6,
            hamiltonian: CMatrix::zeros(1 << 13),
            ready_state: vec![c(1.0, 0.0); 1 << 6],
            pointer_sectors: vec![vec![0], vec![1]],
            labels: vec![0.0, 1.0],
            duration: 1.0,
            hbar: 1.0,
        };
        assert!(matches!(model.validate(), Err(Error::Config(_))));
    }
}
