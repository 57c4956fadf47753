//! Joint user assignment and slot activation as a pair of coalition
//! formation games, one over users and one over slots, played on a fixed
//! channel realization.
//!
//! Users move between cable coalitions and slots join or leave their
//! cable's activation set whenever the move strictly raises the total
//! utility. During the game each cable splits its power equally among its
//! users. Every accepted move raises the sum rate by more than the move
//! tolerance and the configuration space is finite, so the game terminates
//! in a structure where no single user switch or slot toggle helps.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::rate::AssignmentState;
use crate::scenario::{PhysConstants, Scenario};

/// Minimum sum-utility gain (bits/s/Hz) for a move to be accepted.
pub const MOVE_TOLERANCE: f64 = 1e-9;

/// Default cap on outer passes.
pub const DEFAULT_MAX_PASSES: usize = 100;

/// User coalitions `A[k]` and slot coalitions `B[k]` per cable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalitionStructure {
    pub users: Vec<BTreeSet<usize>>,
    pub slots: Vec<BTreeSet<usize>>,
}

impl CoalitionStructure {
    pub fn num_cables(&self) -> usize {
        self.users.len()
    }

    pub fn cable_of(&self, n: usize) -> usize {
        self.users
            .iter()
            .position(|a| a.contains(&n))
            .unwrap_or_else(|| panic!("user {n} is in no coalition"))
    }

    pub fn is_serving(&self, k: usize) -> bool {
        !self.users[k].is_empty()
    }

    pub fn validate(&self, num_users: usize) -> Result<()> {
        if self.users.len() != self.slots.len() {
            return Err(Error::Constraint(
                "user and slot coalitions disagree on cable count".into(),
            ));
        }
        let mut seen = vec![false; num_users];
        for a in &self.users {
            for &n in a {
                if n >= num_users || seen[n] {
                    return Err(Error::Constraint(format!(
                        "user {n} is duplicated or out of range"
                    )));
                }
                seen[n] = true;
            }
        }
        if let Some(n) = seen.iter().position(|s| !s) {
            return Err(Error::Constraint(format!("user {n} is unassigned")));
        }
        for k in 0..self.num_cables() {
            if self.is_serving(k) && self.slots[k].is_empty() {
                return Err(Error::Constraint(format!(
                    "cable {k} serves users but has no active slot"
                )));
            }
        }
        Ok(())
    }

    pub fn to_assignment(&self, num_slots: usize, num_users: usize) -> AssignmentState {
        let alpha = self
            .users
            .iter()
            .map(|a| (0..num_users).map(|n| a.contains(&n)).collect())
            .collect();
        let beta = self
            .slots
            .iter()
            .map(|b| (0..num_slots).map(|m| b.contains(&m)).collect())
            .collect();
        AssignmentState { alpha, beta }
    }

    pub fn from_assignment(state: &AssignmentState) -> Self {
        let collect = |row: &Vec<bool>| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v)
                .map(|(i, _)| i)
                .collect()
        };
        Self {
            users: state.alpha.iter().map(collect).collect(),
            slots: state.beta.iter().map(collect).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    UserSwitch,
    SlotOn,
    SlotOff,
}

/// One accepted (or, for stability checks, improving) move. For slot moves
/// `actor` is the slot index and `from == to` is its cable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub kind: MoveKind,
    pub actor: usize,
    pub from: usize,
    pub to: usize,
    /// Sum utility after the move.
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameTrace {
    /// Sum utility after initialization and after every outer pass.
    pub iteration_utilities: Vec<f64>,
    pub moves: Vec<Move>,
    pub converged: bool,
    pub iterations: usize,
}

impl GameTrace {
    /// Writes `iteration,sum_rate` with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "sum_rate"])?;
        for (i, u) in self.iteration_utilities.iter().enumerate() {
            w.write_record(&[i.to_string(), u.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameLimits {
    pub max_passes: usize,
    pub tolerance: f64,
}

impl Default for GameLimits {
    fn default() -> Self {
        Self {
            max_passes: DEFAULT_MAX_PASSES,
            tolerance: MOVE_TOLERANCE,
        }
    }
}

/// Per-user utilities under equal per-cable power split, from cached
/// effective channels `heff[k][n]`.
fn utilities_from(
    heff: &[Vec<Complex64>],
    s: &CoalitionStructure,
    consts: &PhysConstants,
    num_users: usize,
) -> Vec<f64> {
    let n_c = s.users.iter().filter(|a| !a.is_empty()).count();
    let mut v = vec![0.0; num_users];
    if n_c == 0 {
        return v;
    }
    let scale = consts.p_t / n_c as f64;
    // per cable: gain divisor N_k and user count |A_k|
    let cables: Vec<(f64, f64)> = s
        .users
        .iter()
        .zip(&s.slots)
        .map(|(a, b)| (b.len().max(1) as f64, a.len() as f64))
        .collect();
    for (c, a) in s.users.iter().enumerate() {
        for &n in a {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (k, &(n_k, size)) in cables.iter().enumerate() {
                if size == 0.0 {
                    continue;
                }
                let g = heff[k][n].norm_sqr() / n_k;
                if k == c {
                    signal += g / size;
                    interference += g * (size - 1.0) / size;
                } else {
                    interference += g;
                }
            }
            v[n] = (1.0 + scale * signal / (scale * interference + consts.sigma2)).log2();
        }
    }
    v
}

fn cable_row(cs: &ChannelSet, k: usize, slots: &BTreeSet<usize>) -> Vec<Complex64> {
    let mut row = vec![Complex64::new(0.0, 0.0); cs.num_users()];
    for &m in slots {
        for (acc, h) in row.iter_mut().zip(cs.slot_row(k, m)) {
            *acc += h;
        }
    }
    row
}

/// Structure plus cached effective channels and total utility.
#[derive(Debug, Clone)]
struct GameState {
    s: CoalitionStructure,
    heff: Vec<Vec<Complex64>>,
    utility: f64,
}

/// Game engine bound to one scenario and its channel realization.
#[derive(Debug, Clone, Copy)]
pub struct CoalitionGame<'a> {
    sc: &'a Scenario,
    cs: &'a ChannelSet,
    tolerance: f64,
}

impl<'a> CoalitionGame<'a> {
    pub fn new(sc: &'a Scenario, cs: &'a ChannelSet) -> Self {
        Self {
            sc,
            cs,
            tolerance: MOVE_TOLERANCE,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn consts(&self) -> &PhysConstants {
        &self.sc.constants
    }

    /// Nearest cable for every user (by lateral offset), then the nearest
    /// slot on that cable for every user. Ties go to the lowest index.
    pub fn init_structure(&self) -> CoalitionStructure {
        let k = self.sc.num_cables();
        let mut s = CoalitionStructure {
            users: vec![BTreeSet::new(); k],
            slots: vec![BTreeSet::new(); k],
        };
        for (n, user) in self.sc.users.iter().enumerate() {
            let c = self.sc.nearest_cable(user);
            s.users[c].insert(n);
            s.slots[c].insert(self.sc.nearest_slot(c, user));
        }
        s
    }

    /// Per-user utilities and their sum, evaluated from scratch.
    pub fn utilities(&self, s: &CoalitionStructure) -> (Vec<f64>, f64) {
        let heff = self.heff(s);
        let v = utilities_from(&heff, s, self.consts(), self.cs.num_users());
        let total = v.iter().sum();
        (v, total)
    }

    fn heff(&self, s: &CoalitionStructure) -> Vec<Vec<Complex64>> {
        s.slots
            .iter()
            .enumerate()
            .map(|(k, b)| cable_row(self.cs, k, b))
            .collect()
    }

    fn state(&self, s: CoalitionStructure) -> GameState {
        let heff = self.heff(&s);
        let utility = utilities_from(&heff, &s, self.consts(), self.cs.num_users())
            .iter()
            .sum();
        GameState { s, heff, utility }
    }

    fn total(&self, heff: &[Vec<Complex64>], s: &CoalitionStructure) -> f64 {
        utilities_from(heff, s, self.consts(), self.cs.num_users())
            .iter()
            .sum()
    }

    /// Utility after toggling slot `m` on cable `i`, with the updated row.
    fn toggled(
        &self,
        st: &GameState,
        i: usize,
        m: usize,
    ) -> (f64, CoalitionStructure, Vec<Complex64>) {
        let mut s = st.s.clone();
        let on = !s.slots[i].contains(&m);
        let mut row = st.heff[i].clone();
        let h = self.cs.slot_row(i, m);
        if on {
            s.slots[i].insert(m);
            row.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        } else {
            s.slots[i].remove(&m);
            row.iter_mut().zip(h).for_each(|(a, b)| *a -= b);
        }
        let mut heff = st.heff.clone();
        heff[i] = row.clone();
        (self.total(&heff, &s), s, row)
    }

    /// Structure and utility after moving user `n` to `k_to`. A target
    /// cable with no active slot gets the mover's nearest slot; a source
    /// cable left without users drops its slots.
    fn switched(
        &self,
        st: &GameState,
        n: usize,
        k_to: usize,
    ) -> (f64, CoalitionStructure, Vec<Vec<Complex64>>) {
        let mut s = st.s.clone();
        let from = s.cable_of(n);
        s.users[from].remove(&n);
        s.users[k_to].insert(n);
        let mut heff = st.heff.clone();
        if s.slots[k_to].is_empty() {
            let m = self.sc.nearest_slot(k_to, &self.sc.users[n]);
            s.slots[k_to].insert(m);
            heff[k_to] = cable_row(self.cs, k_to, &s.slots[k_to]);
        }
        if s.users[from].is_empty() {
            s.slots[from].clear();
            heff[from] = vec![Complex64::new(0.0, 0.0); self.cs.num_users()];
        }
        (self.total(&heff, &s), s, heff)
    }

    fn toggle_in_place(&self, st: &mut GameState, i: usize, m: usize) -> Result<Option<Move>> {
        let on = !st.s.slots[i].contains(&m);
        if !on && st.s.slots[i].len() == 1 && st.s.is_serving(i) {
            return Err(Error::Constraint(format!(
                "slot {m} is the last active slot of serving cable {i}"
            )));
        }
        let (u, s, _) = self.toggled(st, i, m);
        if u > st.utility + self.tolerance {
            st.s = s;
            // rebuild the row from scratch so cached sums never drift
            st.heff[i] = cable_row(self.cs, i, &st.s.slots[i]);
            st.utility = self.total(&st.heff, &st.s);
            let kind = if on {
                MoveKind::SlotOn
            } else {
                MoveKind::SlotOff
            };
            return Ok(Some(Move {
                kind,
                actor: m,
                from: i,
                to: i,
                utility: st.utility,
            }));
        }
        Ok(None)
    }

    fn switch_in_place(&self, st: &mut GameState, n: usize, k_to: usize) -> Result<Option<Move>> {
        let from = st.s.cable_of(n);
        if from == k_to {
            return Err(Error::InvalidArgument(format!(
                "user {n} is already on cable {k_to}"
            )));
        }
        let (u, s, heff) = self.switched(st, n, k_to);
        if u > st.utility + self.tolerance {
            st.s = s;
            st.heff = heff;
            st.utility = u;
            return Ok(Some(Move {
                kind: MoveKind::UserSwitch,
                actor: n,
                from,
                to: k_to,
                utility: u,
            }));
        }
        Ok(None)
    }

    /// Activates (or deactivates) slot `m` on cable `i` if that strictly
    /// raises the sum utility. Returns whether the toggle was applied.
    pub fn try_slot_toggle(&self, s: &mut CoalitionStructure, i: usize, m: usize) -> Result<bool> {
        let mut st = self.state(s.clone());
        let accepted = self.toggle_in_place(&mut st, i, m)?.is_some();
        if accepted {
            *s = st.s;
        }
        Ok(accepted)
    }

    /// Moves user `n` to cable `k_to` if that strictly raises the sum
    /// utility under the current slot activation.
    pub fn try_user_switch(
        &self,
        s: &mut CoalitionStructure,
        n: usize,
        k_to: usize,
    ) -> Result<bool> {
        let mut st = self.state(s.clone());
        let accepted = self.switch_in_place(&mut st, n, k_to)?.is_some();
        if accepted {
            *s = st.s;
        }
        Ok(accepted)
    }

    /// One pass over every slot of every serving cable, first improvement.
    fn sweep(&self, st: &mut GameState, trace: &mut GameTrace) {
        for i in 0..st.s.num_cables() {
            if !st.s.is_serving(i) {
                continue;
            }
            for m in 0..self.cs.num_slots() {
                let active = st.s.slots[i].contains(&m);
                if active && st.s.slots[i].len() <= 1 {
                    continue;
                }
                if let Ok(Some(mv)) = self.toggle_in_place(st, i, m) {
                    trace.moves.push(mv);
                }
            }
        }
    }

    /// Runs the game from the nearest-cable, nearest-slot initialization.
    pub fn run(&self, limits: GameLimits) -> (CoalitionStructure, GameTrace) {
        self.run_from(self.init_structure(), limits)
    }

    /// Runs the game from an arbitrary valid structure.
    ///
    /// Each outer pass visits users in index order; before every candidate
    /// switch all serving cables get a slot sweep, and the pass ends with
    /// one more sweep so that a pass without moves certifies stability
    /// (this also covers single-cable deployments, where no switch is
    /// possible).
    pub fn run_from(
        &self,
        start: CoalitionStructure,
        limits: GameLimits,
    ) -> (CoalitionStructure, GameTrace) {
        let game = Self {
            tolerance: limits.tolerance,
            ..*self
        };
        let mut st = game.state(start);
        let mut trace = GameTrace {
            iteration_utilities: vec![st.utility],
            ..Default::default()
        };
        let users = self.cs.num_users();
        let cables = st.s.num_cables();
        for pass in 1..=limits.max_passes {
            let before = trace.moves.len();
            for n in 0..users {
                for k_to in 0..cables {
                    if st.s.cable_of(n) == k_to {
                        continue;
                    }
                    game.sweep(&mut st, &mut trace);
                    if let Ok(Some(mv)) = game.switch_in_place(&mut st, n, k_to) {
                        trace.moves.push(mv);
                    }
                }
            }
            game.sweep(&mut st, &mut trace);
            trace.iteration_utilities.push(st.utility);
            trace.iterations = pass;
            if trace.moves.len() == before {
                trace.converged = true;
                break;
            }
        }
        (st.s, trace)
    }

    /// Every single user switch or slot toggle that would strictly raise
    /// the sum utility.
    pub fn nash_violations(&self, s: &CoalitionStructure) -> Vec<Move> {
        let st = self.state(s.clone());
        let mut out = Vec::new();
        for n in 0..self.cs.num_users() {
            let from = s.cable_of(n);
            for k_to in (0..s.num_cables()).filter(|&k| k != from) {
                let (u, _, _) = self.switched(&st, n, k_to);
                if u > st.utility + self.tolerance {
                    out.push(Move {
                        kind: MoveKind::UserSwitch,
                        actor: n,
                        from,
                        to: k_to,
                        utility: u,
                    });
                }
            }
        }
        for i in (0..s.num_cables()).filter(|&i| s.is_serving(i)) {
            for m in 0..self.cs.num_slots() {
                let active = s.slots[i].contains(&m);
                if active && s.slots[i].len() <= 1 {
                    continue;
                }
                let (u, _, _) = self.toggled(&st, i, m);
                if u > st.utility + self.tolerance {
                    let kind = if active {
                        MoveKind::SlotOff
                    } else {
                        MoveKind::SlotOn
                    };
                    out.push(Move {
                        kind,
                        actor: m,
                        from: i,
                        to: i,
                        utility: u,
                    });
                }
            }
        }
        out
    }

    pub fn verify_nash_stable(&self, s: &CoalitionStructure) -> bool {
        self.nash_violations(s).is_empty()
    }
}
