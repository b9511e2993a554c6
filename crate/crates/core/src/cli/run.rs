use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use super::{io_error, CliError, Command, RunConfig, SCHEMA_VERSION};
use crate::bench::{example41_stress, example41_verify, BenchError, Example41Params};
use crate::evolution::{
    default_budget_constant, energy_report, run_evolution, EvolutionError, FEState,
    LEDGER_CSV_HEADER,
};
use crate::fem::{vtk::write_vtk, FaceSet, FemError, Mesh};
use crate::numfmt::real;
use crate::rigid_limit::{
    fit_rate, fit_rate_above, rigid_residuals, run_sweep, LimitError, RateFit, SweepConfig,
};
use crate::safeload::{max_safety_margin, verify_safe_load, SafeLoadError, SafeLoadOptions};
use crate::tensor::TensorError;

/// In-memory output files, written in one go once a command has finished.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    fn add_vtk(
        &mut self,
        name: &str,
        title: &str,
        mesh: &Mesh,
        u: Option<&[[f64; 2]]>,
        cells: &[(&str, &[crate::tensor::SymTensor])],
    ) {
        let mut buf = Vec::new();
        let points: Vec<(&str, &[[f64; 2]])> = u.map(|u| vec![("u", u)]).unwrap_or_default();
        write_vtk(&mut buf, title, mesh, &points, cells).expect("writing to memory");
        self.add(name, buf);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(io_error(&path))?;
        }
        Ok(())
    }
}

fn tensor_err(e: TensorError) -> CliError {
    CliError::Input {
        module: "tensor_core",
        message: e.to_string(),
    }
}

fn fem_err(e: FemError) -> CliError {
    match e {
        FemError::InvalidMeshSize(_) | FemError::EmptyDirichlet => CliError::Input {
            module: "mesh_fem",
            message: e.to_string(),
        },
        other => CliError::Solver {
            module: "mesh_fem",
            message: other.to_string(),
            epsilon: None,
            step: None,
        },
    }
}

fn evolution_err(e: EvolutionError, epsilon: f64) -> CliError {
    let step = e.step();
    match e {
        EvolutionError::InvalidOptions(_)
        | EvolutionError::DivergentBoundaryData { .. }
        | EvolutionError::InvalidProgram(_) => CliError::Input {
            module: "evolution",
            message: e.to_string(),
        },
        other => CliError::Solver {
            module: "evolution",
            message: other.to_string(),
            epsilon: Some(epsilon),
            step,
        },
    }
}

fn limit_err(e: LimitError) -> CliError {
    match e {
        LimitError::Evolution { epsilon, source } => {
            let step = source.step();
            CliError::Solver {
                module: "rigid_limit",
                message: format!("epsilon {epsilon:e}: {source}"),
                epsilon: Some(epsilon),
                step,
            }
        }
        LimitError::InvalidConfig(_) | LimitError::Tensor(_) => CliError::Input {
            module: "rigid_limit",
            message: e.to_string(),
        },
        other => CliError::Solver {
            module: "rigid_limit",
            message: other.to_string(),
            epsilon: None,
            step: None,
        },
    }
}

fn bench_err(e: BenchError) -> CliError {
    match e {
        BenchError::CheckFailed(_) | BenchError::Fem(_) | BenchError::Degenerate => {
            CliError::Solver {
                module: "examples_bench",
                message: e.to_string(),
                epsilon: None,
                step: None,
            }
        }
        other => CliError::Input {
            module: "examples_bench",
            message: other.to_string(),
        },
    }
}

fn safeload_err(e: SafeLoadError) -> CliError {
    match e {
        SafeLoadError::InvalidOptions(_) | SafeLoadError::NoFreeDofs => CliError::Input {
            module: "safeload",
            message: e.to_string(),
        },
        other => CliError::Solver {
            module: "safeload",
            message: other.to_string(),
            epsilon: None,
            step: None,
        },
    }
}

fn header(command: Command, config: &RunConfig) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("status".into(), json!("ok"));
    m.insert("command".into(), json!(command.name()));
    m.insert("benchmark".into(), json!(config.benchmark));
    m.insert("mesh_n".into(), json!(config.mesh_n));
    m.insert("config".into(), json!(config.serialize()));
    m
}

fn fit_json(fit: Result<RateFit, LimitError>) -> Value {
    match fit {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn execute(command: Command, config: &RunConfig) -> Result<Artifacts, CliError> {
    config.validate()?;
    match command {
        Command::Run => run(config),
        Command::Sweep => sweep(config),
        Command::Example41 => example41(config),
        Command::Safeload => safeload(config),
        Command::Report => report(config),
    }
}

fn run(config: &RunConfig) -> Result<Artifacts, CliError> {
    let b = config.benchmark();
    let mesh = b.mesh(config.mesh_n).map_err(fem_err)?;
    let program = b.program(&mesh, config.times(1.0));
    let hooke = b.material.hooke(config.epsilon).map_err(tensor_err)?;
    let k = b.material.yield_set().map_err(tensor_err)?;
    let ev = run_evolution(
        &program,
        hooke,
        k,
        &mesh,
        FEState::zero(&mesh, program.times[0]),
        config.options(),
    )
    .map_err(|e| evolution_err(e, config.epsilon))?;
    let balance = energy_report(
        &ev.ledger,
        &program,
        default_budget_constant(&mesh, &program, &k),
    );

    let mut a = Artifacts::default();
    let mut csv = Vec::new();
    ev.ledger.write_csv(&mut csv).expect("writing to memory");
    a.add("metrics.csv", csv);
    let last = ev.states.last().expect("initial state present");
    let final_row = ev.ledger.rows.last().copied();
    let mut s = header(Command::Run, config);
    s.insert("epsilon".into(), json!(config.epsilon));
    s.insert("boundary_mode".into(), json!(config.options().mode));
    s.insert("time_steps".into(), json!(program.num_steps()));
    s.insert("metrics_header".into(), json!(LEDGER_CSV_HEADER));
    s.insert("final".into(), json!(final_row));
    s.insert(
        "total_dissipation".into(),
        json!(ev.ledger.total_dissipation()),
    );
    s.insert(
        "inner_iterations".into(),
        json!(ev.inner_iterations.iter().sum::<usize>()),
    );
    s.insert("max_sigma_dev".into(), json!(last.max_sigma_dev()));
    s.insert(
        "energy_balance".into(),
        json!({
            "budget_constant": balance.budget_constant,
            "max_dt": balance.max_dt,
            "budget": balance.budget,
            "max_abs_gap": balance.max_abs_gap,
            "within_budget": balance.within_budget,
            "one_sided": balance.one_sided,
        }),
    );
    a.add_json("summary.json", &Value::Object(s));
    a.add_vtk(
        "fields_final.vtk",
        &format!("{} t={}", config.benchmark, real(last.time)),
        &mesh,
        Some(&last.u),
        &[("sigma", &last.sigma), ("e", &last.e), ("p", &last.p)],
    );
    Ok(a)
}

fn sweep(config: &RunConfig) -> Result<Artifacts, CliError> {
    let b = config.benchmark();
    let sc = SweepConfig {
        benchmark: b,
        epsilons: config.epsilon_list.clone(),
        mesh_n: config.mesh_n,
        times: config.times(3.0),
        options: config.options(),
        threads: config.threads,
    };
    let report = run_sweep(&sc).map_err(limit_err)?;
    let mesh = b.mesh(config.mesh_n).map_err(fem_err)?;
    let program = b.program(&mesh, sc.times.clone());
    let k = b.material.yield_set().map_err(tensor_err)?;
    let residuals = rigid_residuals(&report.limit, &program, &mesh, &k).map_err(limit_err)?;

    let eps = report.epsilons();
    let sup_e = report.column(|m| m.sup_e_l2);
    let div = report.column(|m| m.sup_div_u_l2);
    let scale = report
        .column(|m| m.sup_bd_norm)
        .into_iter()
        .fold(1.0, f64::max);
    let dominated = div
        .iter()
        .zip(&sup_e)
        .all(|(d, e)| *d <= std::f64::consts::SQRT_2 * e * (1.0 + 1e-12) + 1e-15 * scale);

    let mut a = Artifacts::default();
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("writing to memory");
    a.add("metrics.csv", csv);
    let mut s = header(Command::Sweep, config);
    s.insert("epsilons".into(), json!(eps));
    s.insert("times".into(), json!(report.times));
    s.insert("boundary_mode".into(), json!(sc.options.mode));
    s.insert(
        "metrics_header".into(),
        json!(crate::rigid_limit::SWEEP_CSV_HEADER),
    );
    s.insert("per_epsilon".into(), json!(report.metrics));
    s.insert("cauchy_distances".into(), json!(report.cauchy));
    s.insert("e_slope".into(), fit_json(fit_rate(&eps, &sup_e)));
    s.insert(
        "div_u_slope".into(),
        fit_json(fit_rate_above(&eps, &div, 1e-12 * scale)),
    );
    s.insert("div_u_dominated_by_e".into(), json!(dominated));
    s.insert("limit_epsilon".into(), json!(report.limit.epsilon));
    s.insert(
        "limit_residuals".into(),
        json!({
            "max_equilibrium": residuals.max_equilibrium,
            "max_flux": residuals.max_flux,
            "max_feasibility": residuals.max_feasibility,
            "max_div_v": residuals.max_div_v,
            "max_flow_gap": residuals.max_flow_gap,
            "min_cell_flow_gap": residuals.min_cell_flow_gap,
            "max_normal_gap": residuals.max_normal_gap,
        }),
    );
    a.add_json("summary.json", &Value::Object(s));
    let last = report.limit.times.len() - 1;
    a.add_vtk(
        "fields_limit.vtk",
        &format!(
            "{} limit proxy eps={}",
            config.benchmark,
            real(report.limit.epsilon)
        ),
        &mesh,
        Some(&report.limit.u[last]),
        &[("sigma", &report.limit.sigma[last])],
    );
    Ok(a)
}

fn example41(config: &RunConfig) -> Result<Artifacts, CliError> {
    let mesh = Mesh::square(config.mesh_n, FaceSet::all()).map_err(fem_err)?;
    let k = config.material().yield_set().map_err(tensor_err)?;
    let params = Example41Params::new(
        config.ex41_c,
        config.ex41_f.clone(),
        config.ex41_g.clone(),
        config.rigid_rotation,
        config.rigid_translation,
        config.ex41_lambdas[0],
    );
    let w = example41_verify(&params, config.ex41_lambdas, &mesh, &k).map_err(bench_err)?;

    let mut a = Artifacts::default();
    let mut csv =
        b"lambda,max_sigma_dev,equilibrium_interior,equilibrium_flux,dissipation,power\n".to_vec();
    for c in &w.stresses {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            real(c.lambda),
            real(c.max_sigma_dev),
            real(c.residual.interior),
            real(c.residual.flux),
            real(c.dissipation),
            real(c.power)
        )
        .expect("writing to memory");
    }
    a.add("metrics.csv", csv);
    let mut s = header(Command::Example41, config);
    s.insert("nonuniqueness_witness".into(), json!(w.witness));
    s.insert("stress_gap".into(), json!(w.stress_gap));
    s.insert("max_strain_rate".into(), json!(w.max_strain_rate));
    s.insert("max_div_v".into(), json!(w.max_div_v));
    s.insert("smallness".into(), json!(params.smallness()));
    s.insert("stresses".into(), json!(w.stresses));
    a.add_json("summary.json", &Value::Object(s));
    let v = params.velocity(&mesh);
    for (i, &l) in config.ex41_lambdas.iter().enumerate() {
        let sigma =
            example41_stress(&params.with_lambda(l), &mesh, k.radius()).map_err(bench_err)?;
        a.add_vtk(
            &format!("fields_example41_{i}.vtk"),
            &format!("example41 lambda={}", real(l)),
            &mesh,
            Some(&v),
            &[("sigma", &sigma)],
        );
    }
    Ok(a)
}

fn safeload(config: &RunConfig) -> Result<Artifacts, CliError> {
    let b = config.benchmark();
    let mesh = b.mesh(config.mesh_n).map_err(fem_err)?;
    let k = b.material.yield_set().map_err(tensor_err)?;
    let (forcing, _) = b.data(&mesh, config.horizon);
    let options = SafeLoadOptions {
        max_iters: config.safeload_iters,
        ..SafeLoadOptions::default()
    };
    let cert = max_safety_margin(&forcing, &mesh, &k, options).map_err(safeload_err)?;
    let check = verify_safe_load(&cert.stress, &forcing, &mesh, &k, cert.margin, 1e-10)
        .map_err(safeload_err)?;

    let mut a = Artifacts::default();
    let mut csv = b"iteration,fixed_point_residual\n".to_vec();
    for (i, r) in cert.fixed_point_residuals.iter().enumerate() {
        writeln!(csv, "{},{}", i + 1, real(*r)).expect("writing to memory");
    }
    a.add("metrics.csv", csv);
    let mut s = header(Command::Safeload, config);
    s.insert(
        "load_fraction".into(),
        json!(if config.benchmark == crate::bench::BenchmarkId::Traction {
            Some(config.traction_factor)
        } else {
            None
        }),
    );
    s.insert("margin".into(), json!(cert.margin));
    s.insert("safe".into(), json!(cert.margin > 0.0 && check.admissible));
    s.insert("raw_margin".into(), json!(cert.raw_margin));
    s.insert("iterations".into(), json!(cert.iterations));
    s.insert("converged".into(), json!(cert.converged));
    s.insert("certificate".into(), json!(check));
    a.add_json("summary.json", &Value::Object(s));
    a.add_vtk(
        "fields_safeload.vtk",
        &format!("{} safe-load stress", config.benchmark),
        &mesh,
        None,
        &[("pi", &cert.stress)],
    );
    Ok(a)
}

/// Energy-balance refinement study: `M`, `2M`, `4M` uniform steps.
fn report(config: &RunConfig) -> Result<Artifacts, CliError> {
    let b = config.benchmark();
    let mesh = b.mesh(config.mesh_n).map_err(fem_err)?;
    let hooke = b.material.hooke(config.epsilon).map_err(tensor_err)?;
    let k = b.material.yield_set().map_err(tensor_err)?;
    let mut rows = Vec::new();
    let mut last = None;
    for level in 0..3 {
        let mut c = config.clone();
        c.time_steps = config.time_steps << level;
        let program = b.program(&mesh, c.times(1.0));
        let ev = run_evolution(
            &program,
            hooke,
            k,
            &mesh,
            FEState::zero(&mesh, program.times[0]),
            config.options(),
        )
        .map_err(|e| evolution_err(e, config.epsilon))?;
        let r = energy_report(
            &ev.ledger,
            &program,
            default_budget_constant(&mesh, &program, &k),
        );
        rows.push((c.time_steps, r));
        last = Some((ev, program));
    }
    let mut csv = b"time_steps,max_dt,max_abs_gap,budget,within_budget,one_sided\n".to_vec();
    for (m, r) in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            m,
            real(r.max_dt),
            real(r.max_abs_gap),
            real(r.budget),
            r.within_budget,
            r.one_sided
        )
        .expect("writing to memory");
    }
    let ratios: Vec<Option<f64>> = rows
        .windows(2)
        .map(|w| {
            if w[1].1.max_abs_gap > 0.0 {
                Some(w[0].1.max_abs_gap / w[1].1.max_abs_gap)
            } else {
                None
            }
        })
        .collect();
    let mut a = Artifacts::default();
    a.add("metrics.csv", csv);
    let mut s = header(Command::Report, config);
    s.insert("epsilon".into(), json!(config.epsilon));
    s.insert(
        "time_steps".into(),
        json!(rows.iter().map(|r| r.0).collect::<Vec<_>>()),
    );
    s.insert(
        "max_abs_gap".into(),
        json!(rows.iter().map(|r| r.1.max_abs_gap).collect::<Vec<_>>()),
    );
    s.insert("gap_ratios".into(), json!(ratios));
    s.insert(
        "within_budget".into(),
        json!(rows.iter().all(|r| r.1.within_budget)),
    );
    s.insert(
        "one_sided".into(),
        json!(rows.iter().all(|r| r.1.one_sided)),
    );
    a.add_json("summary.json", &Value::Object(s));
    let (ev, _) = last.expect("three levels ran");
    let st = ev.states.last().expect("initial state present");
    a.add_vtk(
        "fields_final.vtk",
        &format!("{} t={}", config.benchmark, real(st.time)),
        &mesh,
        Some(&st.u),
        &[("sigma", &st.sigma), ("p", &st.p)],
    );
    Ok(a)
}
