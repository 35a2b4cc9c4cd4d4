//! Dispatches a scenario to the simulator and collects its output tables.

use anyhow::{bail, Context, Result};
use dfsim_core::export::{growth_table, merit_table, sweep_table, tolerance_csv, trajectory_table};
use dfsim_core::protocols::{calibrate_detuning, neighbour_phase, rotation_tones, rotate_with_tones};
use dfsim_core::{
    coupling_matrices, cphase4, grow_chain, merit_curve_prep, merit_curve_rotation, prepare_b, readout_coupling,
    readout_fluorescence, spectral_params, sweep, tolerance_table, verify_cluster_state_small, BaseScenario, Cell,
    ProtocolResult, SweepProtocol, SweepSpec, Table,
};

use crate::config::{Kind, ScenarioConfig};

const PREP_T_END: f64 = 20.0;
const ROTATION_T_END: f64 = 60.0;
const READOUT_T_END: f64 = 5.0;

/// Everything a run produces, held in memory until the run has succeeded.
pub struct RunOutput {
    /// File name and table, in write order.
    pub files: Vec<(String, Table)>,
    /// Headline numbers, also written as `<prefix>_summary.csv`.
    pub summary: Vec<(String, Cell)>,
}

impl RunOutput {
    fn new() -> Self {
        RunOutput { files: Vec::new(), summary: Vec::new() }
    }

    fn file(&mut self, cfg: &ScenarioConfig, suffix: &str, table: Table) {
        self.files.push((format!("{}_{suffix}.csv", cfg.prefix()), table));
    }

    fn put(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.summary.push((key.into(), value.into()));
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["key", "value"]);
        for (k, v) in &self.summary {
            t.push(vec![Cell::Text(k.clone()), v.clone()]);
        }
        t
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new();
    match cfg.kind {
        Kind::Prepare => prepare(cfg, &mut out)?,
        Kind::Rotate => rotate(cfg, &mut out)?,
        Kind::MeritPrepare => {
            let xis = merit_xis(cfg)?;
            let points = merit_curve_prep(&xis, &cfg.integrator.options())?;
            out.put("points", points.len());
            out.file(cfg, "merit", merit_table(&points));
        }
        Kind::MeritRotate => {
            let xis = merit_xis(cfg)?;
            let points = merit_curve_rotation(&xis, &base_scenario(cfg, Some(SweepProtocol::Rotate))?)?;
            out.put("points", points.len());
            out.put("attained", points.iter().filter(|p| p.attained).count());
            out.file(cfg, "merit", merit_table(&points));
        }
        Kind::ToleranceTable => {
            let base = base_scenario(cfg, None)?;
            let table = tolerance_table(&base, &cfg.sweep()?.table_spec(cfg.seed))?;
            out.put("nested", Cell::Text(table.is_nested().to_string()));
            out.file(cfg, "tolerances", tolerance_csv(&table));
        }
        Kind::Sweep => {
            let s = cfg.sweep()?;
            let spec = SweepSpec {
                axis: s.axis.context("sweep.axis is required")?,
                values: s.values.clone().context("sweep.values is required")?,
                samples: s.samples,
                seed: cfg.seed,
                mode: s.mode,
                timing: s.timing,
            };
            let result = sweep(&spec, &base_scenario(cfg, None)?)?;
            out.put("base_fidelity", result.base_fidelity);
            out.put("base_t_pi", result.base_t_pi);
            out.file(cfg, "sweep", sweep_table(&result));
        }
        Kind::Readout => readout(cfg, &mut out)?,
        Kind::Cphase4 => cphase(cfg, &mut out)?,
        Kind::ClusterGrowth => cluster(cfg, &mut out)?,
    }
    let summary = out.summary_table();
    out.file(cfg, "summary", summary);
    Ok(out)
}

fn protocol_summary(out: &mut RunOutput, r: &ProtocolResult) {
    out.put("fidelity", r.fidelity);
    out.put("fidelity_raw", r.fidelity_raw);
    out.put("t_pi", r.t_pi);
    out.put("merit", r.merit);
    out.put("linewidth", r.linewidth);
    out.put("leakage", r.leakage);
}

fn required(value: Option<f64>, key: &str) -> Result<f64> {
    value.with_context(|| format!("drive.{key} is required"))
}

fn prepare(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<()> {
    let d = cfg.drive()?;
    let r = prepare_b(&cfg.geometry()?, required(d.e_mu, "e_mu")?, d.t_end.unwrap_or(PREP_T_END), &cfg.integrator.options())?;
    protocol_summary(out, &r);
    out.file(cfg, "trajectory", trajectory_table(&r.trajectory));
    Ok(())
}

fn rotate(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<()> {
    let d = cfg.drive()?;
    let g = cfg.geometry()?;
    let opts = cfg.integrator.options();
    let (e_mu, e_nu) = (required(d.e_mu, "e_mu")?, required(d.e_nu, "e_nu")?);
    let nominal = required(d.omega_delta, "omega_delta")?;
    let t_end = d.t_end.unwrap_or(ROTATION_T_END);
    let omega_delta = if d.calibrate {
        let cal = calibrate_detuning(&g, e_mu, e_nu, nominal, t_end, &opts)?;
        out.put("omega_delta_nominal", nominal);
        out.put("calibration_fidelity", cal.fidelity);
        cal.omega_delta
    } else {
        nominal
    };
    let c = coupling_matrices(&g)?;
    let sp = spectral_params(&c)?;
    let r = rotate_with_tones(&g, &c, rotation_tones(&sp, e_mu, e_nu, omega_delta), Some(omega_delta), t_end, &opts)?;
    out.put("omega_delta", omega_delta);
    protocol_summary(out, &r);
    out.file(cfg, "trajectory", trajectory_table(&r.trajectory));
    Ok(())
}

fn merit_xis(cfg: &ScenarioConfig) -> Result<Vec<f64>> {
    let xis = cfg.sweep()?.xi12.clone().context("sweep.xi12 is required")?;
    if xis.is_empty() {
        bail!("sweep.xi12 must not be empty");
    }
    Ok(xis)
}

/// Operating point of sweeps and merit curves; `protocol` overrides
/// `sweep.protocol`.
fn base_scenario(cfg: &ScenarioConfig, protocol: Option<SweepProtocol>) -> Result<BaseScenario> {
    let protocol = match protocol {
        Some(p) => p,
        None => cfg.sweep()?.protocol.context("sweep.protocol is required")?,
    };
    let d = cfg.drive()?;
    let g = cfg.geometry()?;
    let mut base = match protocol {
        SweepProtocol::Prepare => BaseScenario::preparation(g, required(d.e_mu, "e_mu")?),
        SweepProtocol::Rotate => BaseScenario::rotation(
            g,
            required(d.e_mu, "e_mu")?,
            required(d.e_nu, "e_nu")?,
            required(d.omega_delta, "omega_delta")?,
        ),
    };
    if let Some(t) = d.t_end {
        base.t_end = t;
    }
    base.options = cfg.integrator.options();
    Ok(base)
}

fn readout(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<()> {
    let d = cfg.drive()?;
    let g = cfg.geometry()?;
    let opts = cfg.integrator.options();
    let e_mu = required(d.e_mu, "e_mu")?;
    let transition = d.transition.unwrap_or_default();
    let t_end = d.t_end.unwrap_or(READOUT_T_END);
    let zero = readout_fluorescence(&g, e_mu, 0, transition, t_end, &opts)?;
    let one = readout_fluorescence(&g, e_mu, 1, transition, t_end, &opts)?;
    let sp = spectral_params(&coupling_matrices(&g)?)?;
    let (e_cg, gamma_g) = readout_coupling(&sp, e_mu, neighbour_phase(&g, opts.wavevector))?;
    out.put("emission_logical0", zero.final_emission());
    out.put("emission_logical1", one.final_emission());
    out.put("contrast", (one.final_emission() - zero.final_emission()).abs());
    out.put("e_cg", e_cg.norm());
    out.put("gamma_g", gamma_g);
    let mut t = Table::new(["time", "emission_logical0", "emission_logical1"]);
    for k in 0..zero.times.len() {
        t.push(vec![zero.times[k].into(), zero.emission[k].into(), one.emission[k].into()]);
    }
    out.file(cfg, "emission", t);
    Ok(())
}

fn cphase(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<()> {
    let d = cfg.drive()?;
    let g = cfg.geometry()?;
    let r = cphase4(&g, required(d.e_mu, "e_mu")?, d.detuning_offset.unwrap_or(0.0), &cfg.integrator.options())?;
    out.put("conditional_phase", r.conditional_phase);
    out.put("leakage_l", r.leakage_l);
    out.put("leaky", Cell::Text(r.leaky.to_string()));
    out.put("norm_loss", r.norm_loss);
    out.put("duration", r.duration);
    out.put("coupling_fl", r.coupling_fl);
    let mut t = Table::new(["logical", "level", "phase", "retention"]);
    for (k, logical) in ["00", "01", "10", "11"].iter().enumerate() {
        t.push(vec![(*logical).into(), Cell::Text(r.labels[k].to_string()), r.phases[k].into(), r.retention[k].into()]);
    }
    out.file(cfg, "phases", t);
    Ok(())
}

fn cluster(cfg: &ScenarioConfig, out: &mut RunOutput) -> Result<()> {
    let c = cfg.cluster()?;
    let initial = c.initial.unwrap_or(3 * c.ops);
    let mut summary = Table::new([
        "p_success",
        "ops",
        "mean_growth",
        "expected_growth",
        "standard_error",
        "ci_low",
        "ci_high",
        "final_length",
        "resets",
    ]);
    for (k, &p) in c.p_success.iter().enumerate() {
        let run = grow_chain(p, c.ops, initial, cfg.seed.wrapping_add(k as u64))?;
        let s = run.summary();
        summary.push(vec![
            s.p_success.into(),
            s.ops.into(),
            s.mean_growth.into(),
            s.expected_growth.into(),
            s.standard_error.into(),
            s.ci_low.into(),
            s.ci_high.into(),
            s.final_length.into(),
            s.resets.into(),
        ]);
        out.file(cfg, &format!("lengths_{k}"), growth_table(&run));
    }
    out.file(cfg, "growth", summary);
    for n in 2..=c.check_qubits {
        let check = verify_cluster_state_small(n)?;
        out.put(format!("stabilizer_residual_{n}"), check.stabilizer_residual);
        if let Some(r) = check.decomposition_residual {
            out.put(format!("decomposition_residual_{n}"), r);
        }
        if let Some(r) = check.recovery_residual {
            out.put(format!("recovery_residual_{n}"), r);
        }
    }
    Ok(())
}
