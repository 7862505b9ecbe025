use std::collections::BTreeMap;
use std::io::Write;

use crossres::benchmarking::{
    apply_kraus, coherence_limit_1q, coherence_limit_2q, coherence_limit_2q_kraus, depolarize, depolarizing_channel,
    interleaved_rb, relaxation_channel, relaxation_kraus_2q, run_rb, CliffordElement, CoherenceParams, DecayFit,
    FormulaVariant, GateChannel, RbOptions, RbResult, SINGLE_QUBIT_SLOT_NS,
};
use crossres::config::{GridConfig, HtConfig, RunConfig};
use crossres::dynamics::{
    calibrate_zx_gate, ideal_zx90, simulate_cr_rabi, simulate_echoed_cr_evolution, BlochTrajectory, CalibrationOptions,
    CrSystem, EchoedCrGate, NoiseSpec, PropagationOptions, ZxCalibration,
};
use crossres::effective::{default_drive_frequency, sweep_amplitude, sweep_detuning, EffectiveOptions, SweepOptions, SweepRow};
use crossres::httomo::hamiltonian_tomography;
use crossres::model::{DriveSpec, ModeLabel, Preset, MHZ};
use crossres::numerics::{CMatrix, SeedStream};
use crossres::qpt::{basis_labels, process_chi, run_qpt, ConfusionMatrix, QptBasis, QptOptions};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{num, Outputs};
use crate::{plots, Cli, Command, GateKind, NoiseKind, RbNoise};

const DEFAULT_GATE_TIME_NS: f64 = 220.0;

struct Setup {
    config: RunConfig,
    preset: Preset,
    spectator: usize,
    drive: DriveSpec,
}

impl Setup {
    fn load(cli: &Cli) -> CliResult<Self> {
        let config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let preset = config.resolve_preset(cli.levels)?;
        let spectator = config.spectator();
        let drive = config.drive(|| default_drive_frequency(&preset.circuit, spectator))?;
        Ok(Self {
            config,
            preset,
            spectator,
            drive,
        })
    }

    fn system(&self) -> CliResult<CrSystem> {
        Ok(CrSystem::from_spec(&self.preset.circuit, &self.drive, self.spectator)?)
    }

    fn propagation(&self, noise: NoiseKind) -> CliResult<PropagationOptions> {
        let noise = match noise {
            NoiseKind::None => None,
            NoiseKind::Preset => Some(NoiseSpec::from_preset(&self.preset)?),
        };
        Ok(PropagationOptions {
            noise,
            ..PropagationOptions::default()
        })
    }

    /// Control (T) and target (A) coherence.
    fn qubit_coherence(&self) -> CliResult<(CoherenceParams, CoherenceParams)> {
        let q = |l: ModeLabel| {
            let c = self.preset.coherence[l.index()];
            CoherenceParams::new(c.t1, c.t2_echo)
        };
        Ok((q(ModeLabel::T)?, q(ModeLabel::A)?))
    }

    fn gate_time(&self) -> f64 {
        self.config.gate_time_ns.unwrap_or(DEFAULT_GATE_TIME_NS) * 1e-9
    }

    fn calibrate(&self, sys: &CrSystem) -> CliResult<ZxCalibration> {
        Ok(calibrate_zx_gate(sys, &CalibrationOptions::default(), &PropagationOptions::default())?)
    }
}

pub fn dispatch(cli: &Cli, out: &mut Outputs) -> CliResult<()> {
    let setup = Setup::load(cli)?;
    match &cli.command {
        Command::SweepDetuning => sweep(&setup, out, false),
        Command::SweepAmplitude => sweep(&setup, out, true),
        Command::Ht(a) => ht(&setup, out, a.noise),
        Command::EchoedCr(a) => echoed_cr(&setup, out, a.noise, a.points),
        Command::Qpt(a) => qpt(&setup, out, a.gate, a.noise, a.readout_error),
        Command::Rb(a) => rb(cli, &setup, out, a),
        Command::CoherenceLimit(a) => coherence_limit(cli, &setup, out, a.gate_time_ns),
        Command::Preset { .. } => unreachable!("handled before outputs are opened"),
    }
}

pub fn preset_show(cli: &Cli) -> CliResult<()> {
    let setup = Setup::load(cli)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(&setup.preset)?)?;
    Ok(())
}

const SWEEP_HEADER: [&str; 10] = [
    "grid_value", "ZX_MHz", "ZY_MHz", "ZZ_MHz", "IX_MHz", "IY_MHz", "IZ_MHz", "ZI_MHz", "dropped_norm", "status",
];

fn sweep_rows(rows: &[SweepRow], grid_scale: f64) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            let mut v = vec![num(r.grid_value / grid_scale)];
            match &r.result {
                Some(e) => {
                    let c = &e.coefficients;
                    v.extend([c.zx, c.zy, c.zz, c.ix, c.iy, c.iz, c.zi].iter().map(|x| num(x / MHZ)));
                    v.push(num(e.dropped_norm));
                }
                None => v.extend(std::iter::repeat_n("nan".to_string(), 8)),
            }
            v.push(r.status.as_str().to_string());
            v
        })
        .collect()
}

fn sweep(setup: &Setup, out: &mut Outputs, amplitude: bool) -> CliResult<()> {
    let opts = SweepOptions {
        effective: EffectiveOptions {
            spectator_level: setup.spectator,
            ..EffectiveOptions::default()
        },
        auto_frequency: setup.config.drive.as_ref().is_none_or(|d| d.freq_ghz.is_none()),
    };
    let spec = &setup.preset.circuit;
    let (name, rows, script) = if amplitude {
        let grid = setup.config.amplitude_sweep.clone().unwrap_or(GridConfig {
            start: 0.0,
            stop: 40.0,
            points: 41,
        });
        let amps: Vec<f64> = grid.values()?.iter().map(|a| a * MHZ).collect();
        let rows = sweep_amplitude(spec, &setup.drive, &amps, &opts);
        ("sweep_amplitude.csv", sweep_rows(&rows, MHZ), plots::sweep_amplitude("sweep_amplitude.csv"))
    } else {
        let grid = setup.config.sweep.clone().unwrap_or(GridConfig {
            start: -1.0,
            stop: 2.0,
            points: 121,
        });
        let rows = sweep_detuning(spec, &setup.drive, &grid.values()?, &opts);
        ("sweep_detuning.csv", sweep_rows(&rows, 1.0), plots::sweep_detuning("sweep_detuning.csv"))
    };
    let bad = rows.iter().filter(|r| r[9] != "ok").count();
    out.csv(name, &SWEEP_HEADER, &rows)?;
    out.text(&name.replace(".csv", ".py").replace("sweep", "plot_sweep"), &script)?;
    println!("{name}: {} points, {bad} flagged", rows.len());
    Ok(())
}

const TRAJECTORY_HEADER: [&str; 6] = ["t_ns", "x", "y", "z", "control_z", "control_state"];

fn trajectory_rows(trajs: &[BlochTrajectory]) -> Vec<Vec<String>> {
    trajs
        .iter()
        .flat_map(|t| {
            (0..t.len()).map(move |i| {
                vec![
                    num(t.times[i] * 1e9),
                    num(t.x[i]),
                    num(t.y[i]),
                    num(t.z[i]),
                    num(t.control_z[i]),
                    t.control_state.to_string(),
                ]
            })
        })
        .collect()
}

fn mhz_map(terms: &[(&str, f64)]) -> BTreeMap<String, f64> {
    terms.iter().map(|(k, v)| (k.to_string(), v / MHZ)).collect()
}

#[derive(Serialize)]
struct HtSummary {
    drive_amplitude_mhz: f64,
    drive_frequency_ghz: f64,
    /// Coefficients / 2pi in MHz from the fitted trajectories.
    tomography_mhz: BTreeMap<String, f64>,
    /// Same terms from block diagonalization.
    effective_mhz: BTreeMap<String, f64>,
    fits: Vec<String>,
    gamma_mismatch: bool,
}

fn ht(setup: &Setup, out: &mut Outputs, noise: NoiseKind) -> CliResult<()> {
    let sys = setup.system()?;
    let opts = setup.propagation(noise)?;
    let cfg = setup.config.ht.clone().unwrap_or_default();
    let HtConfig {
        tau_max_us,
        points,
        rise_ns,
    } = cfg;
    let trajs = [0, 1]
        .iter()
        .map(|&c| simulate_cr_rabi(&sys, tau_max_us * 1e-6, points, c, rise_ns * 1e-9, &opts))
        .collect::<crossres::Result<Vec<_>>>()?;
    let t = hamiltonian_tomography(&trajs[0], &trajs[1])?;
    let c = &t.coefficients;
    let e = &sys.effective;
    let summary = HtSummary {
        drive_amplitude_mhz: setup.drive.amplitude / MHZ,
        drive_frequency_ghz: setup.drive.frequency / (1e3 * MHZ),
        tomography_mhz: mhz_map(&[("IX", c.ix), ("IY", c.iy), ("IZ", c.iz), ("ZX", c.zx), ("ZY", c.zy), ("ZZ", c.zz)]),
        effective_mhz: mhz_map(&[("IX", e.ix), ("IY", e.iy), ("IZ", e.iz), ("ZX", e.zx), ("ZY", e.zy), ("ZZ", e.zz)]),
        fits: t.fits.iter().map(|f| f.report()).collect(),
        gamma_mismatch: t.gamma_mismatch,
    };
    out.csv("ht_trajectory.csv", &TRAJECTORY_HEADER, &trajectory_rows(&trajs))?;
    out.json("ht_fit.json", &summary)?;
    out.text("plot_ht.py", &plots::trajectory("ht_trajectory.csv", "CR pulse length (ns)", "ht.png"))?;
    println!("ZX/2pi: tomography {:.6} MHz, effective {:.6} MHz", c.zx / MHZ, e.zx / MHZ);
    Ok(())
}

#[derive(Serialize)]
struct EchoSummary {
    calibration: ZxCalibration,
    gate_duration_ns: f64,
    local_z_rad: [f64; 2],
    effective_mhz: BTreeMap<String, f64>,
}

fn echoed_cr(setup: &Setup, out: &mut Outputs, noise: NoiseKind, points: usize) -> CliResult<()> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let sys = setup.system()?;
    let cal = setup.calibrate(&sys)?;
    let opts = setup.propagation(noise)?;
    let gate = EchoedCrGate::new(&sys, &cal, &opts)?;
    let top = 2.0 * cal.timing.half;
    let halves: Vec<f64> = (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect();
    let phased = sys.clone().with_phase(cal.cr_phase);
    let trajs = [0, 1]
        .iter()
        .map(|&c| simulate_echoed_cr_evolution(&phased, &cal.timing, &halves, c, &opts))
        .collect::<crossres::Result<Vec<_>>>()?;
    let e = &sys.effective;
    let summary = EchoSummary {
        calibration: cal,
        gate_duration_ns: gate.duration() * 1e9,
        local_z_rad: gate.local_z,
        effective_mhz: mhz_map(&[("IX", e.ix), ("IY", e.iy), ("IZ", e.iz), ("ZI", e.zi), ("ZX", e.zx), ("ZY", e.zy), ("ZZ", e.zz)]),
    };
    out.csv("echoed_cr.csv", &TRAJECTORY_HEADER, &trajectory_rows(&trajs))?;
    out.json("echoed_cr_calibration.json", &summary)?;
    out.text("plot_echoed_cr.py", &plots::trajectory("echoed_cr.csv", "CR half-pulse length (ns)", "echoed_cr.png"))?;
    println!(
        "calibrated half {:.2} ns, gate {:.2} ns, angle {:.6} rad",
        cal.timing.half * 1e9,
        gate.duration() * 1e9,
        cal.achieved_angle
    );
    Ok(())
}

#[derive(Serialize)]
struct ChiRecord {
    labels: Vec<String>,
    /// Row-major real part.
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ChiRecord {
    fn new(chi: &CMatrix) -> Self {
        let n = chi.nrows();
        let at = |k: usize| chi[(k / n, k % n)];
        Self {
            labels: basis_labels(),
            re: (0..n * n).map(|k| at(k).re).collect(),
            im: (0..n * n).map(|k| at(k).im).collect(),
        }
    }
}

#[derive(Serialize)]
struct QptSummary {
    gate: String,
    noise: String,
    readout_error: f64,
    f_pro: f64,
    f_gate: f64,
    projection_objective: f64,
    projection_iterations: usize,
    projection_converged: bool,
    gate_duration_ns: f64,
}

fn qpt(setup: &Setup, out: &mut Outputs, kind: GateKind, noise: NoiseKind, readout_error: f64) -> CliResult<()> {
    let confusion = if readout_error > 0.0 {
        let c = ConfusionMatrix::symmetric(readout_error)?;
        Some([c, c])
    } else {
        None
    };
    let opts = QptOptions {
        confusion,
        ..QptOptions::default()
    };
    let ideal = ideal_zx90();
    let (result, duration) = match kind {
        GateKind::IdealZx90 => {
            let tau = setup.gate_time();
            let kraus = match noise {
                NoiseKind::None => None,
                NoiseKind::Preset => {
                    let (qc, qt) = setup.qubit_coherence()?;
                    Some(relaxation_kraus_2q(&qc, &qt, tau)?)
                }
            };
            let gate = |rho: &CMatrix| {
                let r = &ideal * rho * ideal.adjoint();
                Ok(match &kraus {
                    Some(k) => apply_kraus(k, &r),
                    None => r,
                })
            };
            (run_qpt(gate, &ideal, &opts)?, tau)
        }
        GateKind::EchoedCr => {
            let sys = setup.system()?;
            let cal = setup.calibrate(&sys)?;
            let gate = EchoedCrGate::new(&sys, &cal, &setup.propagation(noise)?)?;
            (run_qpt(|rho: &CMatrix| gate.apply(rho), &ideal, &opts)?, gate.duration())
        }
    };
    let summary = QptSummary {
        gate: format!("{kind:?}"),
        noise: format!("{noise:?}"),
        readout_error,
        f_pro: result.f_pro,
        f_gate: result.f_gate,
        projection_objective: result.projection.objective,
        projection_iterations: result.projection.iterations,
        projection_converged: result.projection.converged,
        gate_duration_ns: duration * 1e9,
    };
    out.json("chi_experimental.json", &ChiRecord::new(&result.chi_exp))?;
    out.json("chi_physical.json", &ChiRecord::new(&result.chi_p))?;
    out.json("chi_ideal.json", &ChiRecord::new(&result.chi_ideal))?;
    out.json("qpt_summary.json", &summary)?;
    out.text("plot_qpt.py", &plots::chi(&["chi_physical.json", "chi_ideal.json"]))?;
    println!("F_pro = {:.6}, F_gate = {:.6}", result.f_pro, result.f_gate);
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    a: f64,
    b: f64,
    alpha: f64,
    a_err: f64,
    b_err: f64,
    alpha_err: f64,
    /// Error per Clifford.
    r: f64,
    fidelity: f64,
    stderr: f64,
}

impl From<&DecayFit> for FitSummary {
    fn from(f: &DecayFit) -> Self {
        Self {
            a: f.a,
            b: f.b,
            alpha: f.alpha,
            a_err: f.a_err,
            b_err: f.b_err,
            alpha_err: f.alpha_err,
            r: f.error_per_clifford(),
            fidelity: f.fidelity(),
            stderr: f.fidelity_err(),
        }
    }
}

#[derive(Serialize)]
struct RbSummary {
    noise: String,
    shots: Option<u64>,
    reference: FitSummary,
    interleaved: Option<FitSummary>,
    gate_fidelity: Option<f64>,
    gate_fidelity_err: Option<f64>,
    unphysical: Option<bool>,
}

fn rb_rows(r: &RbResult) -> Vec<Vec<String>> {
    r.lengths
        .iter()
        .zip(r.mean_survival.iter().zip(&r.std_survival))
        .map(|(m, (s, sd))| vec![m.to_string(), num(*s), num(*sd), r.n_seq.to_string()])
        .collect()
}

const RB_HEADER: [&str; 4] = ["length", "mean_survival", "std", "n_seq"];

fn rb(cli: &Cli, setup: &Setup, out: &mut Outputs, args: &crate::RbArgs) -> CliResult<()> {
    let seed = cli
        .seed
        .ok_or_else(|| CliError::Usage("rb needs --seed".into()))?;
    let cfg = setup.config.rb.clone().unwrap_or_default();
    let shots = match args.shots {
        Some(0) => None,
        Some(n) => Some(n),
        None => cfg.shots,
    };
    let opts = RbOptions { shots };
    let seeds = SeedStream::new(seed);
    let (qc, qt) = setup.qubit_coherence()?;
    let channel: Box<dyn GateChannel> = match args.noise {
        RbNoise::None => Box::new(depolarizing_channel(0.0)),
        RbNoise::Depolarizing(p) => Box::new(depolarizing_channel(p)),
        RbNoise::Coherence => Box::new(relaxation_channel(qc, qt)),
    };
    let mut summary = RbSummary {
        noise: format!("{:?}", args.noise),
        shots,
        reference: FitSummary::from(&DecayFit {
            a: 0.0,
            b: 0.0,
            alpha: 0.0,
            a_err: 0.0,
            b_err: 0.0,
            alpha_err: 0.0,
            residual: 0.0,
        }),
        interleaved: None,
        gate_fidelity: None,
        gate_fidelity_err: None,
        unphysical: None,
    };
    let mut files = vec!["rb.csv"];
    if args.interleave.is_some() {
        let sys = setup.system()?;
        let cal = setup.calibrate(&sys)?;
        let noise = if args.noise == RbNoise::Coherence { NoiseKind::Preset } else { NoiseKind::None };
        let gate = EchoedCrGate::new(&sys, &cal, &setup.propagation(noise)?)?;
        let chi = process_chi(|rho: &CMatrix| gate.apply(rho))?;
        let qb = QptBasis::new()?;
        let p = match args.noise {
            RbNoise::Depolarizing(p) => p,
            _ => 0.0,
        };
        let zx = CliffordElement::from_unitary(&ideal_zx90())
            .ok_or_else(|| CliError::Usage("ZX90 is not a Clifford".into()))?;
        let res = interleaved_rb(
            &cfg.lengths,
            cfg.n_seq,
            channel.as_ref(),
            &zx,
            |rho: &CMatrix| Ok(depolarize(&qb.apply_chi(&chi, rho), p)),
            &seeds,
            &opts,
        )?;
        summary.reference = FitSummary::from(&res.reference.fit);
        summary.interleaved = Some(FitSummary::from(&res.interleaved.fit));
        summary.gate_fidelity = Some(res.gate_fidelity);
        summary.gate_fidelity_err = Some(res.gate_fidelity_err);
        summary.unphysical = Some(res.unphysical);
        out.csv("rb.csv", &RB_HEADER, &rb_rows(&res.reference))?;
        out.csv("rb_interleaved.csv", &RB_HEADER, &rb_rows(&res.interleaved))?;
        files.push("rb_interleaved.csv");
        println!(
            "reference F = {:.5} +- {:.5}, ZX90 gate F = {:.5} +- {:.5}{}",
            res.reference.fidelity(),
            res.reference.fit.fidelity_err(),
            res.gate_fidelity,
            res.gate_fidelity_err,
            if res.unphysical { " (unphysical)" } else { "" }
        );
    } else {
        let res = run_rb(&cfg.lengths, cfg.n_seq, channel.as_ref(), &seeds, &opts)?;
        summary.reference = FitSummary::from(&res.fit);
        out.csv("rb.csv", &RB_HEADER, &rb_rows(&res))?;
        println!(
            "alpha = {:.6} +- {:.6}, F = {:.5} +- {:.5}",
            res.fit.alpha,
            res.fit.alpha_err,
            res.fidelity(),
            res.fit.fidelity_err()
        );
    }
    out.json("rb_fit.json", &summary)?;
    out.text("plot_rb.py", &plots::rb(&files))?;
    Ok(())
}

#[derive(Serialize)]
struct CoherenceRow {
    variant: FormulaVariant,
    error: f64,
    fidelity: f64,
}

#[derive(Serialize)]
struct CoherenceSummary {
    gate_time_ns: f64,
    selected: FormulaVariant,
    two_qubit: Vec<CoherenceRow>,
    two_qubit_kraus_fidelity: f64,
    single_qubit_gate_ns: f64,
    /// Control then target.
    single_qubit: Vec<[CoherenceRow; 2]>,
}

fn coherence_limit(cli: &Cli, setup: &Setup, out: &mut Outputs, gate_time_ns: Option<f64>) -> CliResult<()> {
    let tau = gate_time_ns.map_or_else(|| setup.gate_time(), |t| t * 1e-9);
    let (qc, qt) = setup.qubit_coherence()?;
    let variants = [FormulaVariant::AsPrinted, FormulaVariant::Completed];
    let two = variants
        .iter()
        .map(|&v| {
            let e = coherence_limit_2q(&qc, &qt, tau, v)?;
            Ok(CoherenceRow {
                variant: v,
                error: e,
                fidelity: 1.0 - e,
            })
        })
        .collect::<crossres::Result<Vec<_>>>()?;
    let tau1 = f64::from(SINGLE_QUBIT_SLOT_NS) * 1e-9;
    let single = [qc, qt]
        .iter()
        .map(|q| {
            let row = |v| -> crossres::Result<CoherenceRow> {
                let e = coherence_limit_1q(q, tau1, v)?;
                Ok(CoherenceRow {
                    variant: v,
                    error: e,
                    fidelity: 1.0 - e,
                })
            };
            Ok([row(variants[0])?, row(variants[1])?])
        })
        .collect::<crossres::Result<Vec<_>>>()?;
    let kraus = 1.0 - coherence_limit_2q_kraus(&qc, &qt, tau)?;
    println!("gate time {:.1} ns ({})", tau * 1e9, setup.preset.name.as_str());
    println!("{:<12} {:>12} {:>12}", "", "as_printed", "completed");
    println!("{:<12} {:>12.6} {:>12.6}", "2q fidelity", two[0].fidelity, two[1].fidelity);
    for (name, s) in ["control 1q", "target 1q"].iter().zip(&single) {
        println!("{:<12} {:>12.6} {:>12.6}", name, s[0].fidelity, s[1].fidelity);
    }
    println!("Kraus-channel 2q fidelity {kraus:.6}");
    let selected = cli.variant;
    println!(
        "selected ({}) 2q fidelity {:.6}",
        if selected == FormulaVariant::Completed { "completed" } else { "as_printed" },
        two.iter().find(|r| r.variant == selected).map_or(f64::NAN, |r| r.fidelity)
    );
    let summary = CoherenceSummary {
        gate_time_ns: tau * 1e9,
        selected,
        two_qubit: two,
        two_qubit_kraus_fidelity: kraus,
        single_qubit_gate_ns: tau1 * 1e9,
        single_qubit: single,
    };
    out.json("coherence_limit.json", &summary)?;
    Ok(())
}
