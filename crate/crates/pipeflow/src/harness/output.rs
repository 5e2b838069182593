//! CSV emission of run results, plus a reader for the snapshot table.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::transition::TransitionMethod;

use super::scenario::{RunOutput, Snapshot, SnapshotRow};

/// Snapshot table: one row per (output time, cell).
pub fn write_output_csv(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,x,A,Q,E,u,h,piezo,head,entropy")?;
    for snap in snapshots {
        for r in &snap.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                snap.t, r.x, r.a, r.q, r.e, r.u, r.h, r.piezo, r.head, r.entropy
            )?;
        }
    }
    Ok(())
}

/// Per-step diagnostics stream.
pub fn write_diagnostics_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,dt,mass,minA,transitions,fallbacks")?;
    for d in &out.diags {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            d.t, d.dt, d.mass, d.min_a, d.transitions, d.fallbacks
        )?;
    }
    Ok(())
}

/// Per-front transition log.
pub fn write_transitions_csv(path: &Path, out: &RunOutput) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,interface,method,w,residual,fallback")?;
    for e in &out.events {
        let method = match e.method {
            TransitionMethod::Ghost => "ghost",
            TransitionMethod::Fka => "fka",
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.t, e.iface, method, e.w, e.residual, e.fallback as u8
        )?;
    }
    Ok(())
}

/// One file per probe position.
pub fn write_probes_csv(dir: &Path, out: &RunOutput) -> Result<()> {
    for (k, series) in out.probes.iter().enumerate() {
        let path = dir.join(format!("probe_{k}.csv"));
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# x = {}", series.x)?;
        writeln!(w, "t,A,Q,u,piezo,head")?;
        for s in &series.samples {
            writeln!(w, "{},{},{},{},{},{}", s.t, s.a, s.q, s.u, s.piezo, s.head)?;
        }
    }
    Ok(())
}

/// Write the full set of run artifacts into a directory.
pub fn write_all(dir: &Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_output_csv(&dir.join("output.csv"), &out.snapshots)?;
    write_diagnostics_csv(&dir.join("diagnostics.csv"), out)?;
    write_transitions_csv(&dir.join("transitions.csv"), out)?;
    write_probes_csv(dir, out)?;
    Ok(())
}

/// Read a snapshot table back (for round-trip checks and post-processing).
pub fn read_output_csv(path: &Path) -> Result<Vec<Snapshot>> {
    let text = std::fs::read_to_string(path)?;
    let mut snaps: Vec<Snapshot> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                crate::Error::Config(format!("{}: line {}: {e}", path.display(), ln + 1))
            })?;
        if cols.len() != 10 {
            return Err(crate::Error::Config(format!(
                "{}: line {}: expected 10 columns",
                path.display(),
                ln + 1
            )));
        }
        let row = SnapshotRow {
            x: cols[1],
            a: cols[2],
            q: cols[3],
            e: cols[4] as u8,
            u: cols[5],
            h: cols[6],
            piezo: cols[7],
            head: cols[8],
            entropy: cols[9],
        };
        match snaps.last_mut() {
            Some(s) if s.t == cols[0] => s.rows.push(row),
            _ => snaps.push(Snapshot {
                t: cols[0],
                rows: vec![row],
            }),
        }
    }
    Ok(snaps)
}
