//! CSV tables for trajectories, sweeps and growth runs. Floats are written
//! with 17 significant digits so that identical runs give identical bytes.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::cluster::GrowthRun;
use crate::dynamics::Trajectory;
use crate::robustness::{MeritPoint, SweepAxis, SweepResult, ToleranceTable};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Full double precision in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Table { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }
}

/// time, norm, [no_jump_probability,] raw populations, renormalised
/// populations.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let lindblad = !traj.no_jump_probability.is_empty();
    let mut headers = vec!["time".to_string(), "norm".to_string()];
    if lindblad {
        headers.push("no_jump_probability".into());
    }
    headers.extend(traj.labels.iter().map(|l| format!("pop_{l}")));
    headers.extend(traj.labels.iter().map(|l| format!("renorm_{l}")));
    let renorm = traj.renormalized_populations();
    let mut table = Table::new(headers);
    for k in 0..traj.len() {
        let mut row = vec![Cell::Num(traj.times[k]), Cell::Num(traj.norms[k])];
        if lindblad {
            row.push(Cell::Num(traj.no_jump_probability[k]));
        }
        row.extend(traj.populations[k].iter().map(|&p| Cell::Num(p)));
        row.extend(renorm[k].iter().map(|&p| Cell::Num(p)));
        table.push(row);
    }
    table
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Rabi => "rabi",
        SweepAxis::Detuning => "detuning",
        SweepAxis::Position => "position",
    }
}

pub fn sweep_table(sweep: &SweepResult) -> Table {
    let mut table = Table::new(["deviation", "mean_fidelity", "stderr", "swap_probability", "samples"]);
    for p in &sweep.points {
        table.push(vec![p.deviation.into(), p.mean_fidelity.into(), p.stderr.into(), p.swap_probability.into(), p.samples.into()]);
    }
    table
}

pub fn tolerance_csv(table: &ToleranceTable) -> Table {
    let mut out = Table::new(["threshold", "axis", "tolerance", "swap_probability"]);
    for r in &table.rows {
        out.push(vec![
            r.threshold.into(),
            axis_name(r.axis).into(),
            r.tolerance.into(),
            r.swap_probability.map_or(Cell::Text(String::new()), Cell::Num),
        ]);
    }
    out
}

pub fn merit_table(points: &[MeritPoint]) -> Table {
    let mut table = Table::new(["xi12", "merit", "t_pi", "fidelity", "linewidth", "rabi", "omega_delta", "attained"]);
    for p in points {
        table.push(vec![
            p.xi12.into(),
            p.merit.into(),
            p.t_pi.into(),
            p.fidelity.into(),
            p.linewidth.into(),
            p.rabi.into(),
            p.omega_delta.map_or(Cell::Text(String::new()), Cell::Num),
            Cell::Text(p.attained.to_string()),
        ]);
    }
    table
}

pub fn growth_table(run: &GrowthRun) -> Table {
    let mut table = Table::new(["op", "length"]);
    for (k, &len) in run.lengths.iter().enumerate() {
        table.push(vec![k.into(), len.into()]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1.5.into(), "x,y".into()]);
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "a,b\n1.5000000000000000e0,\"x,y\"\n");
        assert!(!s.contains('\r'));
    }

    #[test]
    fn growth_rows() {
        let run = crate::cluster::grow_chain(1.0, 3, 2, 0).unwrap();
        let s = growth_table(&run).to_csv_string().unwrap();
        assert_eq!(s, "op,length\n0,2\n1,3\n2,4\n3,5\n");
    }
}
