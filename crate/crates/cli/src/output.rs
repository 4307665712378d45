//! Output-file plumbing: atomic writes, CSV trajectories, summaries.

use hjbk_core::{Result, SimulationResult, Trajectory, ValueFunction};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Resolve the output directory: flag > config > HJBK_OUT_DIR > ".".
pub fn resolve_out_dir(flag: Option<&str>, config_dir: Option<&str>) -> PathBuf {
    if let Some(dir) = flag {
        return PathBuf::from(dir);
    }
    if let Some(dir) = config_dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("HJBK_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, &(text + "\n"))
}

/// One CSV with all trajectories: ic_index, t, x_1..x_n, u_1..u_m, norm, V.
pub fn trajectories_csv(result: &SimulationResult, vf: &ValueFunction) -> String {
    let (n, m) = match result.trajectories.first() {
        Some(t) => (
            t.initial_condition.len(),
            t.controls.first().map(|u| u.len()).unwrap_or(0),
        ),
        None => return String::new(),
    };
    let mut out = String::from("ic_index,t");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    for j in 1..=m {
        out.push_str(&format!(",u_{j}"));
    }
    out.push_str(",norm,V\n");
    for (idx, traj) in result.trajectories.iter().enumerate() {
        for (k, &t) in traj.times.iter().enumerate() {
            let x = &traj.states[k];
            let u = &traj.controls[k];
            out.push_str(&format!("{idx},{t}"));
            for v in x.iter() {
                out.push_str(&format!(",{v}"));
            }
            for v in u.iter() {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{}\n", x.norm(), vf.value(x)));
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct TrajectorySummary {
    pub initial_condition: Vec<f64>,
    pub final_state: Vec<f64>,
    pub final_norm: f64,
    pub cost: f64,
    pub exited_domain: bool,
}

#[derive(Debug, Serialize)]
pub struct BatchSummary {
    pub trajectories: Vec<TrajectorySummary>,
    pub max_final_norm: f64,
    pub mean_final_norm: f64,
    pub decay_alpha: f64,
    pub decay_beta: f64,
}

pub fn batch_summary(result: &SimulationResult) -> BatchSummary {
    let rows = result
        .trajectories
        .iter()
        .map(|t: &Trajectory| TrajectorySummary {
            initial_condition: t.initial_condition.iter().copied().collect(),
            final_state: t
                .states
                .last()
                .map(|x| x.iter().copied().collect())
                .unwrap_or_default(),
            final_norm: t.final_norm,
            cost: t.running_cost.last().copied().unwrap_or(0.0),
            exited_domain: t.exited_domain,
        })
        .collect();
    BatchSummary {
        trajectories: rows,
        max_final_norm: result.max_final_norm,
        mean_final_norm: result.mean_final_norm,
        decay_alpha: result.decay_alpha,
        decay_beta: result.decay_beta,
    }
}
