use std::io::{self, Write};

use super::{CostSpec, GaussianStream, History, LinearSystem, Policy, SysError};
use crate::tolerance::Tolerances;

/// States `x_0..x_T`, inputs `u_0..u_{T-1}`, noises `w_0..w_{T-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub noises: Vec<Vec<f64>>,
    pub seed: u64,
}

/// `A x + B u + H w`, accumulated row by row in a fixed order.
pub(crate) fn step(sys: &LinearSystem, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
    let (a, b, h) = (sys.a(), sys.b(), sys.h());
    (0..sys.n())
        .map(|i| {
            let mut s = 0.0;
            for (aij, xj) in a.row_slice(i).iter().zip(x) {
                s += aij * xj;
            }
            for (bij, uj) in b.row_slice(i).iter().zip(u) {
                s += bij * uj;
            }
            for (hij, wj) in h.row_slice(i).iter().zip(w) {
                s += hij * wj;
            }
            s
        })
        .collect()
}

impl Trajectory {
    /// Horizon `T`.
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds x_0")
    }

    /// Largest deviation from the recurrence over all stored triples.
    pub fn recurrence_residual(&self, sys: &LinearSystem) -> f64 {
        (0..self.horizon())
            .map(|t| {
                let next = step(sys, &self.states[t], &self.inputs[t], &self.noises[t]);
                next.iter()
                    .zip(&self.states[t + 1])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, x_1..x_n, u_1..u_p`; the input cells of the final
    /// row are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states[0].len();
        let p = self.inputs.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=p).map(|i| format!("u_{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (t, x) in self.states.iter().enumerate() {
            let mut cells = vec![t.to_string()];
            cells.extend(x.iter().map(|v| v.to_string()));
            match self.inputs.get(t) {
                Some(u) => cells.extend(u.iter().map(|v| v.to_string())),
                None => cells.extend(std::iter::repeat_n(String::new(), p)),
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Roll the system forward `horizon` steps from `x_0 = 0`.
///
/// Process noise is drawn from substream 0 of `seed`; the policy's auxiliary
/// signal from `aux_seed` when given, else substream 1 of `seed`.
pub fn simulate(
    sys: &LinearSystem,
    policy: &Policy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory, SysError> {
    let (n, p, r) = (sys.n(), sys.p(), sys.r());
    let cutoff = Tolerances::global().divergence_cutoff;
    let mut noise = GaussianStream::substream(seed, 0);
    let mut aux = match policy.aux_seed {
        Some(s) => GaussianStream::new(s),
        None => GaussianStream::substream(seed, 1),
    };
    let mut ctrl = policy.controller(p);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut inputs = Vec::with_capacity(horizon);
    let mut noises = Vec::with_capacity(horizon);
    states.push(vec![0.0; n]);
    for t in 0..horizon {
        let u = ctrl.act(
            &History {
                states: &states,
                inputs: &inputs,
            },
            &mut aux,
        );
        if u.len() != p {
            return Err(SysError::Shape(format!(
                "policy produced {} inputs, system has {p}",
                u.len()
            )));
        }
        let w = noise.normal_vec(r, 1.0);
        let next = step(sys, &states[t], &u, &w);
        if next.iter().any(|v| !(v.abs() <= cutoff)) {
            return Err(SysError::Diverged { step: t + 1, cutoff });
        }
        inputs.push(u);
        noises.push(w);
        states.push(next);
    }
    Ok(Trajectory {
        states,
        inputs,
        noises,
        seed,
    })
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_{t<T} (x'Qx + u'Ru) + x_T' Q_T x_T`.
pub fn rollout_cost(traj: &Trajectory, cost: &CostSpec) -> Result<f64, SysError> {
    let n = traj.states[0].len();
    let p = traj.inputs.first().map_or(cost.r.rows(), Vec::len);
    if cost.q.rows() != n || cost.r.rows() != p {
        return Err(SysError::Shape(format!(
            "cost is for n={}, p={} but trajectory has n={n}, p={p}",
            cost.q.rows(),
            cost.r.rows()
        )));
    }
    let mut acc = Neumaier::default();
    for (x, u) in traj.states.iter().zip(&traj.inputs) {
        acc.add(cost.q.quad_form(x));
        acc.add(cost.r.quad_form(u));
    }
    acc.add(cost.q_terminal.quad_form(traj.final_state()));
    Ok(acc.total())
}

/// Time average of `|u_t|^2`.
pub fn empirical_input_energy(traj: &Trajectory) -> f64 {
    if traj.inputs.is_empty() {
        return 0.0;
    }
    let mut acc = Neumaier::default();
    for u in &traj.inputs {
        acc.add(u.iter().map(|v| v * v).sum());
    }
    acc.total() / traj.inputs.len() as f64
}

/// Per-step mean of `|u_t|^2` across trajectories of equal horizon.
pub fn input_energy_profile(trajs: &[Trajectory]) -> Vec<f64> {
    let Some(first) = trajs.first() else {
        return Vec::new();
    };
    (0..first.horizon())
        .map(|t| {
            trajs
                .iter()
                .map(|tr| tr.inputs[t].iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                / trajs.len() as f64
        })
        .collect()
}

/// Whether the estimated `E|u_t|^2` stays within `budget` at every step.
pub fn check_energy_budget(trajs: &[Trajectory], budget: f64) -> bool {
    input_energy_profile(trajs).iter().all(|e| *e <= budget)
}
