use std::fmt::Write as _;
use std::path::Path;

use biprism_core::iccd::SnapshotSeries;

use crate::error::{CliError, Result};
use crate::formats::write_image_pgm;
use crate::pipeline::write_text;

/// Writes one cumulative PGM per `stride` snapshots (plus the final one) as
/// `frame_NNNNN.pgm`, numbered by snapshots covered, and `frames.csv` with
/// `frame_index,cumulative_counts`. Returns the number of frames.
pub fn emit_buildup_frames(series: &SnapshotSeries, stride: usize, dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut index = String::from("frame_index,cumulative_counts\n");
    let mut n = 0;
    for (i, image) in series.cumulative(stride)?.enumerate() {
        write_image_pgm(&dir.join(format!("frame_{:05}.pgm", image.n_snapshots)), &image)?;
        let _ = writeln!(index, "{i},{}", image.total_counts);
        n += 1;
    }
    write_text(&dir.join("frames.csv"), &index)?;
    Ok(n)
}
