use lgs_core::output::{read_csv, OutputWriter};
use lgs_core::scenario::run_plain;
use lgs_core::{parse_config, ScenarioConfig};

fn basin(steps: u64, every: u64) -> ScenarioConfig {
    let text = format!(
        "[domain]\nsize = 10 8 8\ngravity = 0 0 -1e-4\n[boundary]\nx = periodic\n\
         [fill]\nmode = basin\nlevel = 4\nslope_x = 0.1\n[run]\nsteps = {steps}\noutput_every = {every}\n"
    );
    parse_config(&text).unwrap()
}

#[test]
fn snapshot_cadence_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = basin(250, 50);
    let mut w = OutputWriter::create(dir.path(), &c.to_text(), 100).unwrap();
    let out = run_plain(&c, Some(&mut w)).unwrap().into_result().unwrap();
    let names: Vec<String> =
        w.snapshots.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["snapshot_00000000.vtk", "snapshot_00000100.vtk", "snapshot_00000200.vtk"]);
    let csv = w.finish(&out.rows).unwrap();
    assert_eq!(read_csv(&csv).unwrap(), out.rows);
    let echo = std::fs::read_to_string(dir.path().join("config.echo")).unwrap();
    assert_eq!(parse_config(&echo).unwrap(), c);
}

#[test]
fn zero_steps_give_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = basin(0, 10);
    let w = OutputWriter::create(dir.path(), &c.to_text(), 0).unwrap();
    let out = run_plain(&c, None).unwrap();
    let csv = w.finish(&out.rows).unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("step,body,x,y,z,heel_deg"));
}

#[test]
fn worker_count_does_not_change_results() {
    let mut a = basin(120, 20);
    a.bodies = parse_config(
        "[domain]\nsize = 10 8 8\n[body]\nshape = cuboid\nsize = 4 3 3\ndensity = 0.5\nposition = 5 4 4.2\norientation = 1 0 0 7\n",
    )
    .unwrap()
    .bodies;
    let mut b = a.clone();
    a.run.parallel = false;
    b.run.parallel = true;
    let ra = run_plain(&a, None).unwrap().into_result().unwrap();
    let rb = run_plain(&b, None).unwrap().into_result().unwrap();
    assert_eq!(ra.rows, rb.rows);
    assert_eq!(ra.sim.pdfs.cell(17), rb.sim.pdfs.cell(17));
}
