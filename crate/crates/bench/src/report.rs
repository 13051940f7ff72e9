//! Per-block profile tables and strong-scaling sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use imexdg_core::profile::{Block, BlockTimes};

use crate::case::{build_discretization, initial_state, BackgroundState, RunConfig};
use crate::run::simulate;

pub const PROFILE_COLUMNS: [&str; 4] = ["label", "block", "seconds", "share_percent"];

/// CSV with one row per run and block, and a text table of the same data.
pub fn profile_report(runs: &[(String, BlockTimes)]) -> (String, String) {
    let mut csv = PROFILE_COLUMNS.join(",");
    csv.push('\n');
    let mut table = format!("{:<24}", "block");
    for (label, _) in runs {
        let _ = write!(table, " {:>22}", label);
    }
    table.push('\n');
    for (label, b) in runs {
        let shares = b.shares();
        for (i, blk) in Block::ALL.into_iter().enumerate() {
            let _ = writeln!(csv, "{label},{},{},{}", blk.name(), b.get(blk), shares[i]);
        }
    }
    for (i, blk) in Block::ALL.into_iter().enumerate() {
        let _ = write!(table, "{:<24}", blk.name());
        for (_, b) in runs {
            let _ = write!(table, " {:>10.4}s {:>9.2}%", b.get(blk), b.shares()[i]);
        }
        table.push('\n');
    }
    let _ = write!(table, "{:<24}", "total");
    for (_, b) in runs {
        let _ = write!(table, " {:>10.4}s {:>9.2}%", b.total(), b.shares().iter().sum::<f64>());
    }
    table.push('\n');
    (csv, table)
}

/// Parsed profile row: `(label, block, seconds, share)`.
pub type ProfileRow = (String, Block, f64, f64);

pub fn parse_profile_csv(csv: &str) -> Result<Vec<ProfileRow>> {
    let mut lines = csv.lines();
    let header = lines.next().context("empty profile csv")?;
    if header != PROFILE_COLUMNS.join(",") {
        bail!("unexpected profile header '{header}'");
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                bail!("malformed profile row '{l}'");
            }
            let block = Block::parse(f[1]).with_context(|| format!("unknown block '{}'", f[1]))?;
            Ok((f[0].to_string(), block, f[2].parse()?, f[3].parse()?))
        })
        .collect()
}

pub const SCALING_COLUMNS: [&str; 7] = [
    "case",
    "threads",
    "total_seconds",
    "speedup",
    "efficiency",
    "block",
    "block_seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub threads: usize,
    pub total_seconds: f64,
    pub speedup: f64,
    pub efficiency: f64,
    pub blocks: BlockTimes,
    pub checksum: u64,
}

impl ScalingPoint {
    fn from_times(threads: usize, total: f64, base: (usize, f64), blocks: BlockTimes, checksum: u64) -> Self {
        // repeated thread counts measure noise, not speedup
        let speedup = if threads == base.0 { 1.0 } else { base.1 / total };
        Self {
            threads,
            total_seconds: total,
            speedup,
            efficiency: speedup * base.0 as f64 / threads as f64,
            blocks,
            checksum,
        }
    }
}

fn check_thread_list(thread_list: &[usize]) -> Result<()> {
    if thread_list.len() < 2 {
        bail!("a scaling sweep needs at least two thread counts");
    }
    if thread_list.windows(2).any(|w| w[1] < w[0]) || thread_list[0] == 0 {
        bail!("thread counts must be positive and ascending, got {thread_list:?}");
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if let Some(&t) = thread_list.iter().find(|&&t| t > cores) {
        eprintln!("warning: {t} threads oversubscribe the {cores} available cores");
    }
    Ok(())
}

/// Runs `cfg` once per thread count. Speedup and efficiency are relative
/// to the first entry.
pub fn scaling_sweep(cfg: &RunConfig, thread_list: &[usize]) -> Result<Vec<ScalingPoint>> {
    check_thread_list(thread_list)?;
    let mut out: Vec<ScalingPoint> = Vec::new();
    for &t in thread_list {
        let mut c = cfg.clone();
        c.threads = t;
        c.output_dir = None;
        let run = simulate(&c)?;
        let base = out.first().map_or((t, run.summary.wall_clock_s), |p| (p.threads, p.total_seconds));
        out.push(ScalingPoint::from_times(
            t,
            run.summary.wall_clock_s,
            base,
            run.blocks,
            run.final_state.checksum(),
        ));
    }
    Ok(out)
}

/// Rows `case,threads,total_seconds,speedup,efficiency,block,block_seconds`,
/// one per thread count and block.
pub fn scaling_csv(case: &str, points: &[ScalingPoint]) -> String {
    let mut s = SCALING_COLUMNS.join(",");
    s.push('\n');
    for p in points {
        for b in Block::ALL {
            let _ = writeln!(
                s,
                "{case},{},{},{},{},{},{}",
                p.threads,
                p.total_seconds,
                p.speedup,
                p.efficiency,
                b.name(),
                p.blocks.get(b)
            );
        }
    }
    s
}

/// Times repeated explicit-operator and mass applications on a fixed mesh,
/// one sweep per thread count.
pub fn operator_microbenchmark(cfg: &RunConfig, thread_list: &[usize], reps: usize) -> Result<Vec<ScalingPoint>> {
    check_thread_list(thread_list)?;
    let disc = build_discretization(cfg)?;
    let state = initial_state(cfg, &disc, &BackgroundState::default())?;
    let vel = state.velocity();
    let mut out: Vec<ScalingPoint> = Vec::new();
    for &t in thread_list {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
        let (secs, sum) = pool.install(|| -> Result<(f64, f64)> {
            let mut m = vec![0.0; disc.vector_len()];
            let mut sum = 0.0;
            // warm-up
            disc.explicit_advective_rhs(&state.density, &vel)?;
            let t0 = Instant::now();
            for _ in 0..reps {
                let r = disc.explicit_advective_rhs(&state.density, &vel)?;
                disc.apply_mass(&r.momentum, &mut m)?;
                sum += m[0];
            }
            Ok((t0.elapsed().as_secs_f64(), sum))
        })?;
        let blocks = BlockTimes {
            rhs_assembly: secs,
            ..Default::default()
        };
        let base = out.first().map_or((t, secs), |p| (p.threads, p.total_seconds));
        out.push(ScalingPoint::from_times(t, secs, base, blocks, sum.to_bits()));
    }
    Ok(out)
}
