//! Telemetry CSV, JSON summary and boresight plot-data files.

use std::io::{Read, Write};
use std::path::Path;

use crate::attitude::Vec3;
use crate::error::ScenarioError;

use super::run::{RunOutput, RunSummary, TelemetryRecord};

/// Column names for `zones` forbidden zones, in file order.
pub fn telemetry_header(zones: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "t", "x_e", "theta_deg", "eps_q", "rho_q", "omega_q_raw", "omega_q", "w1", "w2", "w3", "u1", "u2", "u3",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((1..=zones).map(|n| format!("gamma_{n}")));
    h.extend(
        ["theta_eff_1", "theta_eff_2", "theta_eff_3", "g_a", "filt_err", "V_omega", "V_B"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(r: &TelemetryRecord) -> Vec<f64> {
    let mut v = vec![r.t, r.x_e, r.theta_deg, r.eps_q, r.rho_q, r.omega_q_raw, r.omega_q];
    v.extend(r.omega);
    v.extend(r.torque);
    v.extend(&r.gamma);
    v.extend(r.theta_eff);
    v.extend([r.g_a, r.filt_err, r.v_omega, r.v_b]);
    v
}

/// Writes telemetry with a header row and 17 significant digits per value.
pub fn write_telemetry_csv<W: Write>(w: W, records: &[TelemetryRecord]) -> Result<(), ScenarioError> {
    let zones = records.first().map_or(0, |r| r.gamma.len());
    let mut out = csv::Writer::from_writer(w);
    out.write_record(telemetry_header(zones))?;
    for r in records {
        out.write_record(row(r).into_iter().map(fmt))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses telemetry written by [`write_telemetry_csv`].
pub fn read_telemetry_csv<R: Read>(r: R) -> Result<Vec<TelemetryRecord>, ScenarioError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let zones = header.iter().filter(|h| h.starts_with("gamma_")).count();
    let expected = telemetry_header(zones);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(ScenarioError::ConfigInvalid(format!(
            "unexpected telemetry header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let v = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ScenarioError::ConfigInvalid(format!("bad telemetry value: {e}")))?;
        let g = 13 + zones;
        out.push(TelemetryRecord {
            t: v[0],
            x_e: v[1],
            theta_deg: v[2],
            eps_q: v[3],
            rho_q: v[4],
            omega_q_raw: v[5],
            omega_q: v[6],
            omega: [v[7], v[8], v[9]],
            torque: [v[10], v[11], v[12]],
            gamma: v[13..g].to_vec(),
            theta_eff: [v[g], v[g + 1], v[g + 2]],
            g_a: v[g + 3],
            filt_err: v[g + 4],
            v_omega: v[g + 5],
            v_b: v[g + 6],
        });
    }
    Ok(out)
}

/// Mercator coordinates `(longitude, ln tan(π/4 + latitude/2))` of a
/// direction.
pub fn mercator(v: &Vec3) -> (f64, f64) {
    // ln tan(π/4 + lat/2) = atanh(sin lat), which stays exact at the equator.
    let u = v.normalize();
    (u.y.atan2(u.x), u.z.clamp(-1.0, 1.0).atanh())
}

/// Boresight trajectory as unit vectors and Mercator coordinates.
pub fn write_plot_data<W: Write>(w: W, path: &[(f64, Vec3)]) -> Result<(), ScenarioError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "b_x", "b_y", "b_z", "mercator_x", "mercator_y"])?;
    for (t, b) in path {
        let (x, y) = mercator(b);
        out.write_record([*t, b.x, b.y, b.z, x, y].map(fmt))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(w: W, s: &RunSummary) -> Result<(), ScenarioError> {
    serde_json::to_writer_pretty(w, s)?;
    Ok(())
}

/// Writes `telemetry.csv`, `summary.json` and `boresight.csv` into `dir`.
pub fn write_run(dir: &Path, o: &RunOutput) -> Result<(), ScenarioError> {
    std::fs::create_dir_all(dir)?;
    let file = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_telemetry_csv(file("telemetry.csv")?, &o.telemetry)?;
    write_summary_json(file("summary.json")?, &o.summary)?;
    write_plot_data(file("boresight.csv")?, &o.boresight_path)?;
    Ok(())
}
