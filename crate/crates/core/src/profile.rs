//! Wall-clock profiling by algorithm block and the per-step solver report.
//!
//! Scopes nest: time spent in an inner scope is charged to the inner block
//! only, so block times are exclusive and never double-count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    PressureSolve,
    VelocityUpdate,
    RhsAssembly,
    Other,
}

impl Block {
    pub const ALL: [Block; 4] = [
        Block::PressureSolve,
        Block::VelocityUpdate,
        Block::RhsAssembly,
        Block::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::PressureSolve => "pressure_solve",
            Block::VelocityUpdate => "velocity_update",
            Block::RhsAssembly => "rhs_assembly",
            Block::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRecord {
    pub step: usize,
    pub stage: usize,
    pub block: Block,
    pub seconds: f64,
    pub iterations: usize,
}

#[derive(Debug)]
struct Frame {
    block: Block,
    start: Instant,
    children: f64,
}

#[derive(Debug, Default)]
struct Inner {
    step: usize,
    stage: usize,
    stack: Vec<Frame>,
    totals: BTreeMap<(usize, usize, Block), f64>,
    iterations: BTreeMap<(usize, usize, Block), usize>,
}

/// Scope-stack profiler. Shared by reference; interior locking keeps it
/// usable from operator closures.
#[derive(Debug, Default)]
pub struct Profiler {
    inner: Mutex<Inner>,
}

/// Guard returned by [`Profiler::scope`]; the scope ends when it drops.
pub struct Scope<'a> {
    profiler: &'a Profiler,
}

impl Drop for Scope<'_> {
    fn drop(&mut self) {
        self.profiler.pop();
    }
}

impl Profiler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_position(&self, step: usize, stage: usize) {
        let mut g = self.inner.lock().unwrap();
        g.step = step;
        g.stage = stage;
    }

    pub fn scope(&self, block: Block) -> Scope<'_> {
        self.inner.lock().unwrap().stack.push(Frame {
            block,
            start: Instant::now(),
            children: 0.0,
        });
        Scope { profiler: self }
    }

    fn pop(&self) {
        let mut g = self.inner.lock().unwrap();
        let Some(frame) = g.stack.pop() else { return };
        let elapsed = frame.start.elapsed().as_secs_f64();
        let key = (g.step, g.stage, frame.block);
        *g.totals.entry(key).or_insert(0.0) += elapsed - frame.children;
        if let Some(parent) = g.stack.last_mut() {
            parent.children += elapsed;
        }
    }

    pub fn add_iterations(&self, block: Block, n: usize) {
        let mut g = self.inner.lock().unwrap();
        let key = (g.step, g.stage, block);
        *g.iterations.entry(key).or_insert(0) += n;
    }

    /// Drains the accumulated records in `(step, stage, block)` order.
    pub fn take_records(&self) -> Vec<TimingRecord> {
        let mut g = self.inner.lock().unwrap();
        let totals = std::mem::take(&mut g.totals);
        let mut iters = std::mem::take(&mut g.iterations);
        let mut out: Vec<TimingRecord> = totals
            .into_iter()
            .map(|((step, stage, block), seconds)| TimingRecord {
                step,
                stage,
                block,
                seconds,
                iterations: iters.remove(&(step, stage, block)).unwrap_or(0),
            })
            .collect();
        for ((step, stage, block), iterations) in iters {
            out.push(TimingRecord {
                step,
                stage,
                block,
                seconds: 0.0,
                iterations,
            });
        }
        out.sort_by(|a, b| (a.step, a.stage, a.block).cmp(&(b.step, b.stage, b.block)));
        out
    }
}

/// Exclusive seconds per block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockTimes {
    pub pressure_solve: f64,
    pub velocity_update: f64,
    pub rhs_assembly: f64,
    pub other: f64,
}

impl BlockTimes {
    pub fn get(&self, b: Block) -> f64 {
        match b {
            Block::PressureSolve => self.pressure_solve,
            Block::VelocityUpdate => self.velocity_update,
            Block::RhsAssembly => self.rhs_assembly,
            Block::Other => self.other,
        }
    }

    pub fn add(&mut self, b: Block, s: f64) {
        match b {
            Block::PressureSolve => self.pressure_solve += s,
            Block::VelocityUpdate => self.velocity_update += s,
            Block::RhsAssembly => self.rhs_assembly += s,
            Block::Other => self.other += s,
        }
    }

    pub fn tracked(&self) -> f64 {
        self.pressure_solve + self.velocity_update + self.rhs_assembly
    }

    pub fn total(&self) -> f64 {
        self.tracked() + self.other
    }

    /// Percent share of each block in [`Block::ALL`] order.
    pub fn shares(&self) -> [f64; 4] {
        let t = self.total();
        if t <= 0.0 {
            return [0.0; 4];
        }
        Block::ALL.map(|b| 100.0 * self.get(b) / t)
    }

    pub fn merge(&mut self, other: &BlockTimes) {
        for b in Block::ALL {
            self.add(b, other.get(b));
        }
    }
}

/// Outcome of the pressure solve in one stage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageSolve {
    pub stage: usize,
    pub outer_iterations: usize,
    /// GMRES iterations of every outer iteration.
    pub krylov_iterations: Vec<usize>,
    /// Relative update norm `||P^{k+1} - P^k|| / ||P^{k+1}||` per outer iteration.
    pub update_norms: Vec<f64>,
    /// Residual estimates of every GMRES solve.
    pub residual_history: Vec<Vec<f64>>,
    /// Relative residual of the momentum equation `A U + dt B P = F`.
    pub momentum_residual: f64,
    /// Relative residual of the energy equation with coefficients at the
    /// returned iterate.
    pub energy_residual: f64,
}

/// Everything measured during one time step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverReport {
    pub stages: Vec<StageSolve>,
    pub timings: Vec<TimingRecord>,
    pub blocks: BlockTimes,
    pub total_seconds: f64,
}

impl SolverReport {
    pub fn outer_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.outer_iterations).sum()
    }

    pub fn gmres_iterations(&self) -> usize {
        self.stages.iter().flat_map(|s| &s.krylov_iterations).sum()
    }

    pub fn max_momentum_residual(&self) -> f64 {
        self.stages.iter().map(|s| s.momentum_residual).fold(0.0, f64::max)
    }

    pub fn max_energy_residual(&self) -> f64 {
        self.stages.iter().map(|s| s.energy_residual).fold(0.0, f64::max)
    }

    /// Rows `step,stage,block,seconds,iterations`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,stage,block,seconds,iterations\n");
        for r in &self.timings {
            let _ = writeln!(s, "{},{},{},{:e},{}", r.step, r.stage, r.block.name(), r.seconds, r.iterations);
        }
        s
    }
}
