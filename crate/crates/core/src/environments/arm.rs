//! 3D ballistic throw with a 4-joint arm.
//!
//! Joint 0 yaws the whole arm about the vertical axis; segment 0 is a
//! vertical link from the base. Joints 1..3 pitch within the arm plane, each
//! angle measured relative to the previous segment, with the zero pose
//! pointing straight up. A single control step integrates the commanded joint
//! velocities, then the projectile leaves the end effector with its linear
//! velocity and flies drag-free until it reaches the plane z = 0.

use super::{PolicyEnv, Trajectory};
use crate::error::{Error, Result};
use crate::policies::{MlpPolicy, Scratch, Topology};
use crate::sel_exp::OutcomeBounds;

pub const JOINTS: usize = 4;
/// Half-width given to reachable bounds that collapse to a point.
pub const MIN_BOUNDS_HALF_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub segment_lengths: [f64; JOINTS],
    pub velocity_bound: f64,
    pub gravity: f64,
    pub control_dt: f64,
    pub initial_angles: [f64; JOINTS],
}

impl Default for ArmSpec {
    fn default() -> Self {
        ArmSpec {
            segment_lengths: [0.25; JOINTS],
            velocity_bound: 1.0,
            gravity: 9.81,
            control_dt: 0.1,
            initial_angles: [0.0, std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4, 0.0],
        }
    }
}

/// End-effector state at the moment of release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Release {
    pub angles: [f64; JOINTS],
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

impl ArmSpec {
    pub fn validate(&self) -> Result<()> {
        // Zero-length links are allowed so that degenerate arms can be studied.
        if self.segment_lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid(format!(
                "segment lengths must be non-negative: {:?}",
                self.segment_lengths
            )));
        }
        if !(self.velocity_bound > 0.0 && self.velocity_bound.is_finite()) {
            return Err(Error::invalid("velocity bound must be positive"));
        }
        if !(self.gravity > 0.0 && self.gravity.is_finite()) {
            return Err(Error::invalid("gravity must be positive"));
        }
        if !(self.control_dt > 0.0 && self.control_dt.is_finite()) {
            return Err(Error::invalid("control_dt must be positive"));
        }
        if self.initial_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("initial angles must be finite"));
        }
        Ok(())
    }

    fn planar(&self, q: &[f64; JOINTS]) -> (f64, f64, [f64; 3], [f64; 3]) {
        let l = &self.segment_lengths;
        let mut phi = 0.0;
        let (mut r, mut z) = (0.0, l[0]);
        let (mut s, mut c) = ([0.0; 3], [0.0; 3]);
        for i in 1..JOINTS {
            phi += q[i];
            s[i - 1] = l[i] * phi.sin();
            c[i - 1] = l[i] * phi.cos();
            r += s[i - 1];
            z += c[i - 1];
        }
        (r, z, s, c)
    }

    /// End-effector position for joint angles `q`.
    pub fn forward_kinematics(&self, q: &[f64; JOINTS]) -> [f64; 3] {
        let (r, z, _, _) = self.planar(q);
        [r * q[0].cos(), r * q[0].sin(), z]
    }

    /// Linear end-effector velocity for joint angles `q` and joint rates `qd`.
    pub fn end_effector_velocity(&self, q: &[f64; JOINTS], qd: &[f64; JOINTS]) -> [f64; 3] {
        let (r, _, s, c) = self.planar(q);
        // Partial sums from joint j to the tip.
        let mut r_dot = 0.0;
        let mut z_dot = 0.0;
        for j in 1..JOINTS {
            let cs: f64 = c[j - 1..].iter().sum();
            let ss: f64 = s[j - 1..].iter().sum();
            r_dot += cs * qd[j];
            z_dot -= ss * qd[j];
        }
        let (sy, cy) = q[0].sin_cos();
        [r_dot * cy - r * sy * qd[0], r_dot * sy + r * cy * qd[0], z_dot]
    }

    pub fn clamp_velocities(&self, qd: &[f64]) -> [f64; JOINTS] {
        let b = self.velocity_bound;
        let mut out = [0.0; JOINTS];
        for (o, v) in out.iter_mut().zip(qd) {
            *o = v.clamp(-b, b);
        }
        out
    }

    /// One control step from the initial pose, then release.
    pub fn release(&self, commanded: &[f64]) -> Release {
        let qd = self.clamp_velocities(commanded);
        let mut angles = self.initial_angles;
        for (a, v) in angles.iter_mut().zip(&qd) {
            *a += v * self.control_dt;
        }
        Release {
            angles,
            position: self.forward_kinematics(&angles),
            velocity: self.end_effector_velocity(&angles, &qd),
        }
    }

    /// Impact point of a throw commanded with joint velocities `commanded`.
    pub fn throw(&self, commanded: &[f64]) -> [f64; 2] {
        let r = self.release(commanded);
        impact_point(r.position, r.velocity, self.gravity)
    }

    /// Axis-aligned box around every impact point reachable with joint rates
    /// in the velocity bounds, found by a lattice search over the rate cube
    /// followed by coordinate refinement.
    pub fn reachable_box(&self) -> OutcomeBounds {
        const LATTICE: usize = 13;
        let b = self.velocity_bound;
        let level = |i: usize| -b + 2.0 * b * i as f64 / (LATTICE - 1) as f64;
        // Best rate vector per (axis, direction).
        let mut best: [([f64; JOINTS], f64); 4] = [([0.0; JOINTS], f64::NEG_INFINITY); 4];
        let consider = |qd: [f64; JOINTS], best: &mut [([f64; JOINTS], f64); 4]| {
            let p = self.throw(&qd);
            for (slot, v) in best.iter_mut().zip([p[0], -p[0], p[1], -p[1]]) {
                if v > slot.1 {
                    *slot = (qd, v);
                }
            }
        };
        for a in 0..LATTICE {
            for bb in 0..LATTICE {
                for c in 0..LATTICE {
                    for d in 0..LATTICE {
                        consider([level(a), level(bb), level(c), level(d)], &mut best);
                    }
                }
            }
        }
        let objective = |slot: usize, qd: &[f64; JOINTS]| {
            let p = self.throw(qd);
            [p[0], -p[0], p[1], -p[1]][slot]
        };
        for (slot, entry) in best.iter_mut().enumerate() {
            let mut step = 2.0 * b / (LATTICE - 1) as f64;
            while step > 1e-9 {
                let mut improved = false;
                for j in 0..JOINTS {
                    for sign in [-1.0, 1.0] {
                        let mut cand = entry.0;
                        cand[j] = (cand[j] + sign * step).clamp(-b, b);
                        let v = objective(slot, &cand);
                        if v > entry.1 {
                            *entry = (cand, v);
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
        }
        let lo = [-best[1].1, -best[3].1];
        let hi = [best[0].1, best[2].1];
        let mut lower = vec![0.0; 2];
        let mut upper = vec![0.0; 2];
        for d in 0..2 {
            let margin = (1e-3 * (hi[d] - lo[d])).max(1e-9);
            let mid = 0.5 * (lo[d] + hi[d]);
            let half = (0.5 * (hi[d] - lo[d]) + margin).max(MIN_BOUNDS_HALF_WIDTH);
            lower[d] = mid - half;
            upper[d] = mid + half;
        }
        OutcomeBounds::new(lower, upper).expect("half-widths are positive")
    }

    /// Origin-centred square enclosing [`reachable_box`](Self::reachable_box).
    pub fn range_square(&self) -> OutcomeBounds {
        let b = self.reachable_box();
        let half = b
            .lower()
            .iter()
            .chain(b.upper())
            .fold(MIN_BOUNDS_HALF_WIDTH, |m, v| m.max(v.abs()));
        OutcomeBounds::square(-half, half).expect("positive half-width")
    }
}

/// Where a projectile released at `p` with velocity `v` meets z = 0 under
/// gravity `g`. Releases at or below the plane land where they start.
pub fn impact_point(p: [f64; 3], v: [f64; 3], g: f64) -> [f64; 2] {
    if p[2] <= 0.0 {
        return [p[0], p[1]];
    }
    let t = (v[2] + (v[2] * v[2] + 2.0 * g * p[2]).sqrt()) / g;
    [p[0] + v[0] * t, p[1] + v[1] * t]
}

/// Which outcome box the environment declares for goal sampling and grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsShape {
    /// Tight axis-aligned box around the reachable impact points.
    Box,
    /// Origin-centred square around the reachable impact points.
    Square,
}

/// Ballistic throw as a policy environment. The policy reads the initial
/// joint angles plus a constant 1.0 and emits five values; the first four are
/// the joint velocities and the fifth is unused.
#[derive(Debug, Clone)]
pub struct BallisticEnv {
    spec: ArmSpec,
    topology: Topology,
    bounds: OutcomeBounds,
    input: Vec<f64>,
}

impl BallisticEnv {
    /// Declares the origin-centred square as outcome bounds.
    pub fn new(spec: ArmSpec) -> Result<Self> {
        Self::with_shape(spec, BoundsShape::Square)
    }

    pub fn with_shape(spec: ArmSpec, shape: BoundsShape) -> Result<Self> {
        spec.validate()?;
        let bounds = match shape {
            BoundsShape::Box => spec.reachable_box(),
            BoundsShape::Square => spec.range_square(),
        };
        let mut input = spec.initial_angles.to_vec();
        input.push(1.0);
        Ok(BallisticEnv {
            spec,
            topology: Topology::mlp(JOINTS + 1, JOINTS + 1),
            bounds,
            input,
        })
    }

    /// Replaces the default hidden layers; inputs and outputs stay at five.
    pub fn with_topology(mut self, topology: Topology) -> Result<Self> {
        if topology.n_inputs() != JOINTS + 1 || topology.n_outputs() != JOINTS + 1 {
            return Err(Error::invalid("ballistic policies map 5 inputs to 5 outputs"));
        }
        self.topology = topology;
        Ok(self)
    }

    pub fn spec(&self) -> &ArmSpec {
        &self.spec
    }

    pub fn policy(&self, params: &[f64]) -> Result<MlpPolicy> {
        MlpPolicy::new(
            self.topology.clone(),
            params,
            vec![self.spec.velocity_bound; JOINTS + 1],
        )
    }

    fn commanded(&self, policy: &MlpPolicy) -> Result<[f64; JOINTS + 1]> {
        let mut out = [0.0; JOINTS + 1];
        policy.forward_into(&self.input, &mut Scratch::default(), &mut out);
        Ok(out)
    }

    pub fn rollout(&self, policy: &MlpPolicy) -> Result<Trajectory> {
        let t = policy.topology();
        if t.n_inputs() != JOINTS + 1 || t.n_outputs() != JOINTS + 1 {
            return Err(Error::invalid(format!(
                "ballistic policies map 5 inputs to 5 outputs, got {} -> {}",
                t.n_inputs(),
                t.n_outputs()
            )));
        }
        let cmd = self.commanded(policy)?;
        let r = self.spec.release(&cmd[..JOINTS]);
        let start = self.spec.forward_kinematics(&self.spec.initial_angles);
        let state = |q: &[f64; JOINTS], p: [f64; 3], v: [f64; 3]| {
            let mut s = q.to_vec();
            s.extend_from_slice(&p);
            s.extend_from_slice(&v);
            s
        };
        Ok(Trajectory {
            states: vec![
                state(&self.spec.initial_angles, start, [0.0; 3]),
                state(&r.angles, r.position, r.velocity),
            ],
            outcome: impact_point(r.position, r.velocity, self.spec.gravity).to_vec(),
        })
    }
}

impl PolicyEnv for BallisticEnv {
    fn name(&self) -> &str {
        "ballistic3d"
    }

    fn topology(&self) -> &Topology {
        &self.topology
    }

    fn reachable_bounds(&self) -> OutcomeBounds {
        self.bounds.clone()
    }

    fn evaluate(&self, params: &[f64]) -> Result<Vec<f64>> {
        let cmd = self.commanded(&self.policy(params)?)?;
        Ok(self.spec.throw(&cmd[..JOINTS]).to_vec())
    }

    fn trajectory(&self, params: &[f64]) -> Result<Trajectory> {
        self.rollout(&self.policy(params)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::{polynomial_mutation, random_init, GeneBounds, MutationSpec};
    use crate::rng::stream;
    use rand::Rng;
    use std::f64::consts::PI;

    type Mat = [[f64; 4]; 4];

    fn mul(a: &Mat, b: &Mat) -> Mat {
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    fn rot_z(t: f64) -> Mat {
        [
            [t.cos(), -t.sin(), 0.0, 0.0],
            [t.sin(), t.cos(), 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    fn rot_y(t: f64) -> Mat {
        [
            [t.cos(), 0.0, t.sin(), 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [-t.sin(), 0.0, t.cos(), 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    fn lift(l: f64) -> Mat {
        let mut m = rot_z(0.0);
        m[2][3] = l;
        m
    }

    fn transform_chain(spec: &ArmSpec, q: &[f64; 4]) -> [f64; 3] {
        let mut m = mul(&rot_z(q[0]), &lift(spec.segment_lengths[0]));
        for i in 1..4 {
            m = mul(&m, &rot_y(q[i]));
            m = mul(&m, &lift(spec.segment_lengths[i]));
        }
        [m[0][3], m[1][3], m[2][3]]
    }

    fn random_angles<R: Rng>(rng: &mut R) -> [f64; 4] {
        [
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
        ]
    }

    #[test]
    fn zero_pose_points_straight_up() {
        let spec = ArmSpec::default();
        assert_eq!(spec.forward_kinematics(&[0.0; 4]), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn base_half_turn_mirrors_through_the_axis() {
        let spec = ArmSpec::default();
        let q = [0.3, 0.7, -0.2, 0.4];
        let a = spec.forward_kinematics(&q);
        let b = spec.forward_kinematics(&[q[0] + PI, q[1], q[2], q[3]]);
        assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12 && (a[2] - b[2]).abs() < 1e-12);
    }

    #[test]
    fn kinematics_match_transform_chain() {
        let spec = ArmSpec {
            segment_lengths: [0.3, 0.2, 0.45, 0.1],
            ..ArmSpec::default()
        };
        let mut rng = stream(1);
        for _ in 0..1000 {
            let q = random_angles(&mut rng);
            let a = spec.forward_kinematics(&q);
            let b = transform_chain(&spec, &q);
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = ArmSpec::default();
        let mut rng = stream(2);
        let h = 1e-6;
        for _ in 0..200 {
            let q = random_angles(&mut rng);
            let qd = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let v = spec.end_effector_velocity(&q, &qd);
            let step = |s: f64| {
                let mut qq = q;
                for i in 0..4 {
                    qq[i] += s * qd[i];
                }
                transform_chain(&spec, &qq)
            };
            let (p, m) = (step(h), step(-h));
            for d in 0..3 {
                assert!((v[d] - (p[d] - m[d]) / (2.0 * h)).abs() < 1e-7);
            }
        }
    }

    /// Explicit Euler flight, with the crossing step interpolated linearly.
    fn euler_flight(p: [f64; 3], v: [f64; 3], g: f64, dt: f64) -> ([f64; 2], f64) {
        let (mut x, mut y, mut z) = (p[0], p[1], p[2]);
        let mut vz = v[2];
        loop {
            let (nz, nvz) = (z + vz * dt, vz - g * dt);
            let (nx, ny) = (x + v[0] * dt, y + v[1] * dt);
            if nz <= 0.0 {
                let f = z / (z - nz);
                let speed_z = vz + f * (nvz - vz);
                return ([x + f * (nx - x), y + f * (ny - y)], speed_z);
            }
            (x, y, z, vz) = (nx, ny, nz, nvz);
        }
    }

    #[test]
    fn impact_matches_small_step_integration() {
        let env = BallisticEnv::new(ArmSpec::default()).unwrap();
        let spec = env.spec().clone();
        let mut rng = stream(3);
        let dt = 1e-5;
        for _ in 0..50 {
            let params = random_init(env.topology(), GeneBounds::default(), &mut rng);
            let traj = env.trajectory(&params).unwrap();
            let s = &traj.states[1];
            let (p, v) = ([s[4], s[5], s[6]], [s[7], s[8], s[9]]);
            // Euler's position error is linear in dt, so one extrapolation
            // step from dt and dt/2 removes it.
            let (a, _) = euler_flight(p, v, spec.gravity, dt);
            let (b, _) = euler_flight(p, v, spec.gravity, dt / 2.0);
            for d in 0..2 {
                let est = 2.0 * b[d] - a[d];
                assert!((traj.outcome[d] - est).abs() < 1e-6, "{} vs {}", traj.outcome[d], est);
            }
        }
    }

    #[test]
    fn impact_speed_is_at_least_release_speed() {
        let spec = ArmSpec::default();
        let mut rng = stream(4);
        for _ in 0..200 {
            let qd = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let r = spec.release(&qd);
            let (_, vz_end) = euler_flight(r.position, r.velocity, spec.gravity, 1e-4);
            let release = r.velocity.iter().map(|c| c * c).sum::<f64>().sqrt();
            let end = (r.velocity[0].powi(2) + r.velocity[1].powi(2) + vz_end * vz_end).sqrt();
            assert!(end >= release - 1e-9);
        }
    }

    #[test]
    fn degenerate_throws() {
        let spec = ArmSpec::default();
        let p = spec.forward_kinematics(&spec.initial_angles);
        assert_eq!(spec.throw(&[0.0; 4]), [p[0], p[1]]);
        assert_eq!(impact_point([0.2, -0.1, 0.8], [0.0, 0.0, 3.0], 9.81), [0.2, -0.1]);
        assert_eq!(impact_point([0.2, -0.1, -0.5], [1.0, 1.0, 3.0], 9.81), [0.2, -0.1]);
    }

    #[test]
    fn velocities_are_clamped() {
        let spec = ArmSpec::default();
        assert_eq!(spec.throw(&[5.0, -5.0, 5.0, -5.0]), spec.throw(&[1.0, -1.0, 1.0, -1.0]));
    }

    #[test]
    fn zero_length_arm_gets_minimum_bounds() {
        let spec = ArmSpec {
            segment_lengths: [0.0; 4],
            ..ArmSpec::default()
        };
        let b = spec.reachable_box();
        for d in 0..2 {
            assert!(b.lower()[d] < 0.0 && b.upper()[d] > 0.0);
            assert!((b.upper()[d] - b.lower()[d] - 2.0 * MIN_BOUNDS_HALF_WIDTH).abs() < 1e-12);
        }
        assert!(ArmSpec {
            segment_lengths: [-0.1, 0.2, 0.2, 0.2],
            ..ArmSpec::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn bounds_contain_random_policy_outcomes() {
        let square = BallisticEnv::with_shape(ArmSpec::default(), BoundsShape::Square).unwrap();
        let tight = BallisticEnv::with_shape(ArmSpec::default(), BoundsShape::Box).unwrap();
        let (sq, bx) = (square.reachable_bounds(), tight.reachable_bounds());
        assert_eq!(sq.lower()[0], -sq.upper()[0]);
        assert_eq!(sq.lower()[0], sq.lower()[1]);
        let mut rng = stream(6);
        for _ in 0..2000 {
            let params = random_init(tight.topology(), GeneBounds::default(), &mut rng);
            let o = tight.evaluate(&params).unwrap();
            assert!(bx.contains(&o) && sq.contains(&o), "{o:?}");
        }
        // Raw rate vectors probe the box more densely than saturated policies.
        for _ in 0..100_000 {
            let qd = [
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
            ];
            assert!(bx.contains(&tight.spec().throw(&qd)));
        }
    }

    #[test]
    fn evaluate_agrees_with_trajectory() {
        let env = BallisticEnv::new(ArmSpec::default()).unwrap();
        let mut rng = stream(7);
        for _ in 0..20 {
            let params = random_init(env.topology(), GeneBounds::default(), &mut rng);
            assert_eq!(env.evaluate(&params).unwrap(), env.trajectory(&params).unwrap().outcome);
        }
        let zeros = vec![0.0; env.topology().param_count()];
        let p = env.spec().forward_kinematics(&env.spec().initial_angles);
        assert_eq!(env.evaluate(&zeros).unwrap(), vec![p[0], p[1]]);
    }

    #[test]
    fn small_mutations_move_outcomes_little() {
        let env = BallisticEnv::new(ArmSpec::default()).unwrap();
        let spec = MutationSpec::new(2000.0, 0.1, GeneBounds::default()).unwrap();
        let mut rng = stream(8);
        let mut steps = Vec::new();
        let mut outcomes = Vec::new();
        for _ in 0..1000 {
            let p = random_init(env.topology(), GeneBounds::default(), &mut rng);
            let child = polynomial_mutation(&p, &spec, &mut rng).unwrap();
            let (a, b) = (env.evaluate(&p).unwrap(), env.evaluate(&child).unwrap());
            steps.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            outcomes.push(a);
        }
        let mut pairs: Vec<f64> = outcomes
            .chunks(2)
            .map(|w| ((w[0][0] - w[1][0]).powi(2) + (w[0][1] - w[1][1]).powi(2)).sqrt())
            .collect();
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let (m_step, m_pair) = (median(&mut steps), median(&mut pairs));
        assert!(10.0 * m_step < m_pair, "step {m_step} pair {m_pair}");
    }
}
