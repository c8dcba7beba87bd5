//! Trajectory engine for the induced bilinear system under piecewise-constant
//! controls. Each interval is integrated exactly as exp(dt (B0 + sum u_i B_i)),
//! so norm conservation and orbit confinement hold to machine precision and
//! the test suite can lean on them.

use std::io::Write;

use nalgebra::DVector;

use crate::algebra::{GeneratorSet, SystemKind};
use crate::error::{Error, Result};
use crate::orbit::expm;
use crate::rankcond::{StatePoint, StateSpace};

/// Piecewise-constant control schedule: strictly increasing breakpoints
/// t_0 < ... < t_K with one constant m-vector per interval.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSchedule {
    mesh: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl ControlSchedule {
    pub fn new(mesh: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if mesh.len() < 2 {
            return Err(Error::Input("schedule needs at least two breakpoints".into()));
        }
        if values.len() + 1 != mesh.len() {
            return Err(Error::Input(format!(
                "schedule has {} intervals but {} control vectors",
                mesh.len() - 1,
                values.len()
            )));
        }
        if mesh.iter().any(|t| !t.is_finite())
            || values.iter().any(|u| u.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::Input("schedule contains non-finite values".into()));
        }
        if mesh.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input(
                "schedule breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self { mesh, values })
    }

    /// A single interval [0, duration] under the constant control `u`.
    pub fn constant(u: DVector<f64>, duration: f64) -> Result<Self> {
        Self::new(vec![0.0, duration], vec![u])
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, &DVector<f64>)> {
        self.mesh
            .windows(2)
            .zip(self.values.iter())
            .map(|(w, u)| (w[0], w[1], u))
    }

    /// Time-reversed schedule with negated controls; running it from the
    /// endpoint of a trajectory retraces it back to the start.
    pub fn reversed(&self) -> Self {
        let t_end = *self.mesh.last().expect("nonempty mesh");
        let mesh = self.mesh.iter().rev().map(|t| t_end - t).collect();
        let values = self.values.iter().rev().map(|u| -u).collect();
        Self { mesh, values }
    }
}

/// One exact step: exp(dt (B0 + sum u_i B_i)) applied to x (in homogeneous
/// coordinates for the affine kind).
pub fn step(gens: &GeneratorSet, u: &DVector<f64>, dt: f64, x: &StatePoint) -> Result<StatePoint> {
    if !(dt > 0.0) {
        return Err(Error::Input(format!("step size must be positive, got {dt}")));
    }
    if u.len() != gens.controls().len() {
        return Err(Error::Input(format!(
            "control vector has {} entries for {} control generators",
            u.len(),
            gens.controls().len()
        )));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("control vector has non-finite entries".into()));
    }
    let s = gens.ambient_size();
    let mut field = gens
        .drift()
        .cloned()
        .unwrap_or_else(|| nalgebra::DMatrix::zeros(s, s));
    for (ui, b) in u.iter().zip(gens.controls()) {
        field += *ui * b;
    }
    let e = expm(&(dt * field))?;
    let coords = match gens.kind() {
        SystemKind::Affine => {
            let hom = x.coords().clone().push(1.0);
            let out = e * hom;
            out.rows(0, x.dim()).into_owned()
        }
        _ => e * x.coords(),
    };
    StatePoint::from_flow(coords, x.space())
}

/// Time mesh, state sequence and the schedule that produced it.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StatePoint>,
}

impl Trajectory {
    pub fn initial(&self) -> &StatePoint {
        &self.states[0]
    }

    pub fn final_state(&self) -> &StatePoint {
        self.states.last().expect("nonempty trajectory")
    }

    /// Largest deviation of |x| from 1 over the recorded states; meaningful
    /// for the skew kind only.
    pub fn max_norm_drift(&self) -> f64 {
        self.states
            .iter()
            .filter(|s| s.space() == StateSpace::Sphere)
            .map(|s| (s.coords().norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Folds `step` over the schedule intervals, recording the state at every
/// breakpoint. `oversample` extra states are recorded uniformly inside each
/// interval (0 records breakpoints only).
pub fn run_sampled(
    gens: &GeneratorSet,
    x0: &StatePoint,
    schedule: &ControlSchedule,
    oversample: usize,
) -> Result<Trajectory> {
    if x0.dim() != gens.n() {
        return Err(Error::Input(format!(
            "initial state dimension {} does not match system dimension {}",
            x0.dim(),
            gens.n()
        )));
    }
    let mut times = vec![schedule.mesh()[0]];
    let mut states = vec![x0.clone()];
    for (t0, t1, u) in schedule.intervals() {
        let substeps = oversample + 1;
        let dt = (t1 - t0) / substeps as f64;
        for k in 1..=substeps {
            let next = step(gens, u, dt, states.last().expect("nonempty"))?;
            times.push(t0 + dt * k as f64);
            states.push(next);
        }
    }
    Ok(Trajectory { times, states })
}

pub fn run(gens: &GeneratorSet, x0: &StatePoint, schedule: &ControlSchedule) -> Result<Trajectory> {
    run_sampled(gens, x0, schedule, 0)
}

/// Time column followed by one coordinate column per state dimension.
pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    let n = traj.states[0].dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x{}", i + 1)));
    writeln!(w, "{}", header.join(","))?;
    for (t, s) in traj.times.iter().zip(traj.states.iter()) {
        let mut row = vec![format!("{t:.17e}")];
        row.extend(s.coords().iter().map(|v| format!("{v:.17e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{lie_closure, GeneratorSet, GroupAssertions, TolerancePolicy};
    use crate::rankcond::rank_at;
    use crate::testutil::{bloch_generators, random_skew, chain4_generators, unit};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_larmor_revolution_returns_to_start() {
        let gens = bloch_generators(1.0);
        let x = StatePoint::sphere(unit(3, 0)).unwrap();
        let y = step(&gens, &DVector::zeros(2), std::f64::consts::TAU, &x).unwrap();
        assert!((y.coords() - x.coords()).norm() <= 1e-12);
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let gens = chain4_generators();
        let x = StatePoint::sphere(unit(4, 2)).unwrap();
        let y = step(&gens, &DVector::zeros(2), 1.0, &x).unwrap();
        assert_eq!(y.coords(), x.coords());
    }

    #[test]
    fn chain4_fixed_point_is_inert_under_any_control() {
        let gens = chain4_generators();
        let x = StatePoint::sphere(unit(4, 0)).unwrap();
        let y = step(&gens, &DVector::from_vec(vec![0.7, -1.3]), 2.0, &x).unwrap();
        assert!((y.coords() - x.coords()).norm() <= 1e-14);
    }

    #[test]
    fn pi_pulse_matches_closed_form_rotation() {
        // omega_0 = 0, u = 1 on the y control for a duration of pi flips e3
        let gens = bloch_generators(0.0);
        let x0 = StatePoint::sphere(unit(3, 2)).unwrap();
        let schedule = ControlSchedule::constant(
            DVector::from_vec(vec![1.0, 0.0]),
            std::f64::consts::PI,
        )
        .unwrap();
        let traj = run(&gens, &x0, &schedule).unwrap();
        // closed form: exp(t Omega_y) e3 = cos(t) e3 + sin(t) e1
        assert!((traj.final_state().coords() - (-unit(3, 2))).norm() <= 1e-12);
    }

    #[test]
    fn single_interval_run_equals_step() {
        let gens = bloch_generators(1.0);
        let x0 = StatePoint::sphere(unit(3, 0)).unwrap();
        let u = DVector::from_vec(vec![0.4, -0.2]);
        let schedule = ControlSchedule::constant(u.clone(), 1.5).unwrap();
        let traj = run(&gens, &x0, &schedule).unwrap();
        let direct = step(&gens, &u, 1.5, &x0).unwrap();
        assert_eq!(traj.states.len(), 2);
        assert_eq!(traj.final_state().coords(), direct.coords());
    }

    #[test]
    fn refinement_changes_endpoint_negligibly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let gens = GeneratorSet::skew(
                4,
                Some(random_skew(4, &mut rng)),
                vec![random_skew(4, &mut rng)],
                GroupAssertions::default(),
            )
            .unwrap();
            let x0 = crate::rankcond::sample_point(StateSpace::Sphere, 4, &mut rng);
            let u = DVector::from_vec(vec![rng.gen_range(-1.0..1.0)]);
            let coarse = ControlSchedule::new(vec![0.0, 2.0], vec![u.clone()]).unwrap();
            let fine = ControlSchedule::new(vec![0.0, 0.8, 2.0], vec![u.clone(), u.clone()])
                .unwrap();
            let a = run(&gens, &x0, &coarse).unwrap();
            let b = run(&gens, &x0, &fine).unwrap();
            assert!(
                (a.final_state().coords() - b.final_state().coords()).norm() <= 1e-12
            );
        }
    }

    #[test]
    fn norm_conserved_over_many_steps() {
        let gens = bloch_generators(1.0);
        let x0 = StatePoint::sphere(unit(3, 0)).unwrap();
        let steps = 10_000;
        let mesh: Vec<f64> = (0..=steps).map(|k| k as f64 * 1e-3).collect();
        let values = (0..steps)
            .map(|k| DVector::from_vec(vec![(k as f64 * 0.01).sin(), 0.3]))
            .collect();
        let schedule = ControlSchedule::new(mesh, values).unwrap();
        let traj = run(&gens, &x0, &schedule).unwrap();
        assert!(traj.max_norm_drift() <= 1e-9);
    }

    #[test]
    fn rank_is_confined_along_trajectories() {
        let gens = chain4_generators();
        let basis = lie_closure(&gens, &TolerancePolicy::default()).unwrap();
        let x0 = StatePoint::sphere(unit(4, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mesh: Vec<f64> = (0..=20).map(|k| k as f64 * 0.3).collect();
        let values = (0..20)
            .map(|_| DVector::from_vec(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]))
            .collect();
        let schedule = ControlSchedule::new(mesh, values).unwrap();
        let traj = run(&gens, &x0, &schedule).unwrap();
        for s in &traj.states {
            assert_eq!(rank_at(&basis, s).unwrap(), 2);
            assert!(s.coords()[0].abs() <= 1e-9);
        }
    }

    #[test]
    fn reversed_schedule_returns_to_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gens = GeneratorSet::skew(
            4,
            None,
            vec![random_skew(4, &mut rng), random_skew(4, &mut rng)],
            GroupAssertions::default(),
        )
        .unwrap();
        let x0 = crate::rankcond::sample_point(StateSpace::Sphere, 4, &mut rng);
        let mesh: Vec<f64> = (0..=10).map(|k| k as f64 * 0.5).collect();
        let values = (0..10)
            .map(|_| {
                DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            })
            .collect();
        let schedule = ControlSchedule::new(mesh, values).unwrap();
        let traj = run(&gens, &x0, &schedule).unwrap();
        let back = run(&gens, traj.final_state(), &schedule.reversed()).unwrap();
        assert!((back.final_state().coords() - x0.coords()).norm() <= 1e-9);
    }

    #[test]
    fn oversampling_inserts_states() {
        let gens = bloch_generators(1.0);
        let x0 = StatePoint::sphere(unit(3, 0)).unwrap();
        let schedule =
            ControlSchedule::constant(DVector::from_vec(vec![0.5, 0.0]), 1.0).unwrap();
        let traj = run_sampled(&gens, &x0, &schedule, 3).unwrap();
        assert_eq!(traj.states.len(), 5);
        let plain = run(&gens, &x0, &schedule).unwrap();
        assert!(
            (traj.final_state().coords() - plain.final_state().coords()).norm() <= 1e-13
        );
    }

    #[test]
    fn schedule_validation() {
        assert!(ControlSchedule::new(vec![0.0], vec![]).is_err());
        assert!(
            ControlSchedule::new(vec![0.0, 1.0, 0.5], vec![DVector::zeros(1); 2]).is_err()
        );
        assert!(ControlSchedule::new(vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let gens = bloch_generators(1.0);
        let x = StatePoint::sphere(unit(3, 0)).unwrap();
        assert!(step(&gens, &DVector::zeros(2), -1.0, &x).is_err());
        assert!(step(&gens, &DVector::zeros(3), 1.0, &x).is_err());
    }
}
