//! Trajectory snapshot export: CSV (one row per sample time, row-major field
//! samples) and a raw little-endian binary dump.
//!
//! Binary layout: magic `VRLX`, version `u32`, dimension `u32`, points per
//! axis `u32`, component-field count `u32`, then per sample the time as `f64`
//! followed by every component field in state order, C-contiguous, all values
//! little-endian `f64`.

use visco_core::equilibrium::EquilTrajectory;
use visco_core::field::ScalarField;
use visco_core::relax::Trajectory;

pub const BINARY_MAGIC: &[u8; 4] = b"VRLX";
pub const BINARY_VERSION: u32 = 1;

fn component_names(d: usize, with_stress: bool) -> Vec<String> {
    let mut names = Vec::new();
    for i in 1..=d {
        for a in 1..=d {
            names.push(format!("F{i}{a}"));
        }
    }
    for i in 1..=d {
        names.push(format!("v{i}"));
    }
    if with_stress {
        for i in 1..=d {
            for a in 1..=d {
                names.push(format!("S{i}{a}"));
            }
        }
    }
    names
}

fn csv_header(names: &[String], points: usize) -> String {
    let mut header = String::from("t");
    for name in names {
        for p in 0..points {
            header.push_str(&format!(",{name}_{p}"));
        }
    }
    header.push('\n');
    header
}

fn push_fields_csv(row: &mut String, fields: &[&ScalarField]) {
    for f in fields {
        for v in f.values() {
            row.push_str(&format!(",{v}"));
        }
    }
}

/// Relaxation trajectory as CSV: `t`, then all `F`, `v`, `S` samples.
pub fn relax_csv(traj: &Trajectory) -> String {
    let d = traj.config.grid.dim();
    let points = traj.config.grid.total_points();
    let mut out = csv_header(&component_names(d, true), points);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let mut row = format!("{t}");
        let fields: Vec<&ScalarField> = state.components().collect();
        push_fields_csv(&mut row, &fields);
        row.push('\n');
        out.push_str(&row);
    }
    out
}

/// Equilibrium trajectory as CSV: `t`, then all `F`, `v` samples.
pub fn equil_csv(traj: &EquilTrajectory) -> String {
    let d = traj.config.grid.dim();
    let points = traj.config.grid.total_points();
    let mut out = csv_header(&component_names(d, false), points);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let mut row = format!("{t}");
        let fields: Vec<&ScalarField> = state
            .f
            .components()
            .iter()
            .chain(state.v.components())
            .collect();
        push_fields_csv(&mut row, &fields);
        row.push('\n');
        out.push_str(&row);
    }
    out
}

fn binary_header(d: usize, n: usize, field_count: usize) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(field_count as u32).to_le_bytes());
    out
}

fn push_fields_binary(out: &mut Vec<u8>, fields: &[&ScalarField]) {
    for f in fields {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Relaxation trajectory as the raw binary dump.
pub fn relax_binary(traj: &Trajectory) -> Vec<u8> {
    let d = traj.config.grid.dim();
    let n = traj.config.grid.n_points();
    let field_count = 2 * d * d + d;
    let mut out = binary_header(d, n, field_count);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        out.extend_from_slice(&t.to_le_bytes());
        let fields: Vec<&ScalarField> = state.components().collect();
        push_fields_binary(&mut out, &fields);
    }
    out
}

/// Equilibrium trajectory as the raw binary dump (`d^2 + d` fields).
pub fn equil_binary(traj: &EquilTrajectory) -> Vec<u8> {
    let d = traj.config.grid.dim();
    let n = traj.config.grid.n_points();
    let field_count = d * d + d;
    let mut out = binary_header(d, n, field_count);
    for (t, state) in traj.times.iter().zip(&traj.states) {
        out.extend_from_slice(&t.to_le_bytes());
        let fields: Vec<&ScalarField> = state
            .f
            .components()
            .iter()
            .chain(state.v.components())
            .collect();
        push_fields_binary(&mut out, &fields);
    }
    out
}
