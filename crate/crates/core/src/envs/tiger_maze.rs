//! Tiger-Treasure maze: a grid with two doors on the top wall. Moving up from
//! a door cell enters the door, which leads to Tiger or Gold by context; the
//! next step respawns the agent at the respawn cell. Listening moves the agent
//! to the twin cell whose indicator shows the true context.
//!
//! Row 0 is the top row. Grid state index is `(ind * H + y) * W + x` with
//! indicator `ind` = 0 (unknown), 1 (context 0), 2 (context 1). Context 0
//! puts the tiger behind the first door.

use super::{check_gamma, one_hot_rows, EnvError, EnvKind, Environment};
use crate::cmdp::CmdpBuilder;
use crate::scalar::Scalar;

pub const MAZE_UP: usize = 0;
pub const MAZE_DOWN: usize = 1;
pub const MAZE_LEFT: usize = 2;
pub const MAZE_RIGHT: usize = 3;
pub const MAZE_LISTEN: usize = 4;
const NUM_ACTIONS: usize = 5;
const INDICATORS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TigerMazeSpec {
    pub width: usize,
    pub height: usize,
    /// Columns of the two door cells on the top row.
    pub doors: [usize; 2],
    pub respawn: (usize, usize),
    /// Whether the indicator survives a respawn.
    pub keep_indicator: bool,
    pub gamma: f64,
    pub horizon: usize,
}

impl Default for TigerMazeSpec {
    fn default() -> Self {
        Self { width: 5, height: 3, doors: [1, 3], respawn: (2, 2), keep_indicator: false, gamma: 0.99, horizon: 40 }
    }
}

/// Index arithmetic for a built maze.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeLayout {
    pub width: usize,
    pub height: usize,
    pub doors: [usize; 2],
    pub respawn: (usize, usize),
    pub keep_indicator: bool,
}

impl MazeLayout {
    pub fn grid_states(&self) -> usize {
        INDICATORS * self.width * self.height
    }

    pub fn num_states(&self) -> usize {
        self.grid_states() + if self.keep_indicator { 2 * INDICATORS } else { 2 }
    }

    pub fn state(&self, x: usize, y: usize, ind: usize) -> usize {
        (ind * self.height + y) * self.width + x
    }

    /// `(x, y, indicator)` for grid states, `None` for Tiger/Gold.
    pub fn coords(&self, s: usize) -> Option<(usize, usize, usize)> {
        if s >= self.grid_states() {
            return None;
        }
        let x = s % self.width;
        let y = (s / self.width) % self.height;
        Some((x, y, s / (self.width * self.height)))
    }

    fn outcome_slot(&self, ind: usize) -> usize {
        self.grid_states() + if self.keep_indicator { 2 * ind } else { 0 }
    }

    pub fn tiger(&self, ind: usize) -> usize {
        self.outcome_slot(ind)
    }

    pub fn gold(&self, ind: usize) -> usize {
        self.outcome_slot(ind) + 1
    }

    pub fn tiger_states(&self) -> Vec<usize> {
        let inds = if self.keep_indicator { 0..INDICATORS } else { 0..1 };
        inds.map(|i| self.tiger(i)).collect()
    }

    pub fn gold_states(&self) -> Vec<usize> {
        let inds = if self.keep_indicator { 0..INDICATORS } else { 0..1 };
        inds.map(|i| self.gold(i)).collect()
    }

    /// Indicator carried by any state (Tiger/Gold carry it only when kept).
    pub fn indicator(&self, s: usize) -> usize {
        match self.coords(s) {
            Some((_, _, ind)) => ind,
            None if self.keep_indicator => (s - self.grid_states()) / 2,
            None => 0,
        }
    }

    /// Observation encoding one-hot(X) ++ one-hot(Y) ++ one-hot(indicator) of a grid state.
    pub fn observation(&self, s: usize) -> Option<Vec<u8>> {
        let (x, y, ind) = self.coords(s)?;
        let mut v = vec![0u8; self.width + self.height + INDICATORS];
        v[x] = 1;
        v[self.width + y] = 1;
        v[self.width + self.height + ind] = 1;
        Some(v)
    }
}

pub fn build_tiger_maze<F: Scalar>(spec: &TigerMazeSpec) -> Result<Environment<F>, EnvError> {
    check_gamma(spec.gamma)?;
    let (w, h) = (spec.width, spec.height);
    if w < 2 || h < 1 {
        return Err(EnvError::InvalidSpec("maze must be at least 2x1".into()));
    }
    if spec.doors[0] >= w || spec.doors[1] >= w || spec.doors[0] == spec.doors[1] {
        return Err(EnvError::InvalidSpec(format!("doors {:?} must be distinct columns < {w}", spec.doors)));
    }
    if spec.respawn.0 >= w || spec.respawn.1 >= h {
        return Err(EnvError::InvalidSpec(format!("respawn {:?} outside {w}x{h} grid", spec.respawn)));
    }
    let layout = MazeLayout {
        width: w,
        height: h,
        doors: spec.doors,
        respawn: spec.respawn,
        keep_indicator: spec.keep_indicator,
    };
    let ns = layout.num_states();
    let mut b = CmdpBuilder::<F>::new(ns, NUM_ACTIONS, 2);
    for ind in 0..INDICATORS {
        for y in 0..h {
            for x in 0..w {
                let s = layout.state(x, y, ind);
                for a in 0..4 {
                    let door = if a == MAZE_UP && y == 0 { spec.doors.iter().position(|&d| d == x) } else { None };
                    if let Some(k) = door {
                        // context k hides the tiger behind door k
                        for theta in 0..2 {
                            let out = if theta == k { layout.tiger(ind) } else { layout.gold(ind) };
                            b.set(s, a, theta, out, F::one());
                        }
                        continue;
                    }
                    let (nx, ny) = match a {
                        MAZE_UP => (x, y.saturating_sub(1)),
                        MAZE_DOWN => (x, (y + 1).min(h - 1)),
                        MAZE_LEFT => (x.saturating_sub(1), y),
                        _ => ((x + 1).min(w - 1), y),
                    };
                    b.set_all_contexts(s, a, layout.state(nx, ny, ind));
                }
                for theta in 0..2 {
                    b.set(s, MAZE_LISTEN, theta, layout.state(x, y, theta + 1), F::one());
                }
            }
        }
    }
    let outcome_inds: Vec<usize> = if spec.keep_indicator { (0..INDICATORS).collect() } else { vec![0] };
    for &ind in &outcome_inds {
        let back = layout.state(spec.respawn.0, spec.respawn.1, ind);
        for a in 0..NUM_ACTIONS {
            b.set_all_contexts(layout.tiger(ind), a, back);
            b.set_all_contexts(layout.gold(ind), a, back);
        }
    }
    b.initial_state(layout.state(spec.respawn.0, spec.respawn.1, 0))
        .context_prior(vec![F::lit(0.5), F::lit(0.5)])
        .gamma(F::lit(spec.gamma))
        .features(ns, one_hot_rows(ns, NUM_ACTIONS));
    let mdp = b.build()?;
    let mut omega = vec![F::zero(); ns];
    for &ind in &outcome_inds {
        omega[layout.gold(ind)] = F::one();
        omega[layout.tiger(ind)] = -F::one();
    }
    let mut coe_set = Vec::new();
    for ind in 1..INDICATORS {
        for y in 0..h {
            for x in 0..w {
                for a in 0..NUM_ACTIONS {
                    coe_set.push((layout.state(x, y, ind), a));
                }
            }
        }
    }
    let mut state_names: Vec<String> = (0..layout.grid_states())
        .map(|s| {
            let (x, y, ind) = layout.coords(s).unwrap();
            format!("({x},{y})#{ind}")
        })
        .collect();
    for &ind in &outcome_inds {
        let sfx = if spec.keep_indicator { format!("#{ind}") } else { String::new() };
        state_names.push(format!("Tiger{sfx}"));
        state_names.push(format!("Gold{sfx}"));
    }
    Ok(Environment {
        kind: EnvKind::TigerMaze,
        mdp,
        true_omega: omega,
        state_names,
        action_names: ["up", "down", "left", "right", "listen"].map(String::from).to_vec(),
        coe_set,
        horizon: spec.horizon,
        listen_action: Some(MAZE_LISTEN),
        gold_states: layout.gold_states(),
        tiger_states: layout.tiger_states(),
        maze: Some(layout),
    })
}
