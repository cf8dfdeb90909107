use biprism::formats::{
    read_histogram, read_meta, read_pattern, read_timestamps, write_histogram, write_pattern, write_timestamps,
};
use biprism::CliError;
use biprism_core::coincidence::delay_histogram;
use biprism_core::optics::IntensityPattern;
use biprism_core::source::EmitterModel;
use biprism_core::whichpath::acquire_detections;

#[test]
fn timestamps_round_trip_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    let stream = acquire_detections(&EmitterModel::poisson_laser(1), 0.5, 5000, 2).unwrap();
    write_timestamps(&path, &stream, 17).unwrap();
    let meta = read_meta(&path.with_extension("meta")).unwrap();
    assert_eq!(meta.seed, 17);
    assert_eq!(meta.n_triggers, stream.n_triggers);
    let back = read_timestamps(&path, None).unwrap();
    assert_eq!(back.n_triggers, stream.n_triggers);
    assert_eq!(back.records.len(), stream.records.len());
    for (a, b) in back.records.iter().zip(&stream.records) {
        assert_eq!((a.channel, a.pulse_index), (b.channel, b.pulse_index));
        assert!((a.time_ns - b.time_ns).abs() <= 5e-4);
    }
}

#[test]
fn timestamps_without_sidecar_need_a_period() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ts.csv");
    std::fs::write(&path, "channel,time_ns,pulse_index\n1,10.5,0\n2,900.0,2\n").unwrap();
    assert!(matches!(read_timestamps(&path, None), Err(CliError::Config { .. })));
    let s = read_timestamps(&path, Some(436.0)).unwrap();
    assert_eq!(s.n_triggers, 3);
    std::fs::write(&path, "channel,time_ns,pulse_index\n3,10.5,0\n").unwrap();
    assert!(matches!(read_timestamps(&path, Some(436.0)), Err(CliError::Parse { line: 2, .. })));
}

#[test]
fn histogram_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let stream = acquire_detections(&EmitterModel::poisson_laser(3), 0.5, 20_000, 4).unwrap();
    let h = delay_histogram(&stream, 2.0, 5.0 * 436.0).unwrap();
    write_histogram(&path, &h).unwrap();
    let back = read_histogram(&path, 436.0).unwrap();
    assert_eq!(back.counts, h.counts);
    assert_eq!(back.half_bins, h.half_bins);
    assert!((back.bin_width_ns - h.bin_width_ns).abs() < 1e-9);
}

#[test]
fn pattern_round_trip_and_pitch_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let p = IntensityPattern {
        x_start_um: -100.0,
        pitch_um: 2.5,
        intensity: (0..81).map(|j| 1.0 + (j as f64 * 0.3).sin()).collect(),
        plane_z_mm: 0.0,
        magnification: 10.0,
    };
    write_pattern(&path, &p).unwrap();
    let back = read_pattern(&path, 10.0).unwrap();
    assert!((back.pitch_um - 2.5).abs() < 1e-9);
    assert_eq!(back.x_start_um, -100.0);
    for (a, b) in back.intensity.iter().zip(&p.intensity) {
        assert!((a - b).abs() < 1e-8 * b);
    }

    std::fs::write(&path, "x_um,intensity\n0,1\n1,1\n3,1\n").unwrap();
    assert!(matches!(read_pattern(&path, 1.0), Err(CliError::Parse { line: 3, .. })));
    std::fs::write(&path, "").unwrap();
    assert!(matches!(read_pattern(&path, 1.0), Err(CliError::Parse { .. })));
    std::fs::write(&path, "x_um,intensity\n").unwrap();
    assert!(matches!(read_pattern(&path, 1.0), Err(CliError::Parse { .. })));
    std::fs::write(&path, "x,y\n0,1\n").unwrap();
    assert!(matches!(read_pattern(&path, 1.0), Err(CliError::Parse { line: 1, .. })));
}
