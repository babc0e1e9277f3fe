use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde_json::json;
use vvot::lifted::{lot_embed as embed, pairwise_matrix, sample_reference, write_embedding_csv, write_matrix_csv, SimplexCost};
use vvot::static_ot::{
    check_chain, check_chain_with, d_w_matrix, extend_grid, lifted_semimetric_upper, random_instance,
    simplex_distance_matrix, simplex_grid, ChainConfig, ChainContext,
};
use vvot::verify::{verify_suite, Suite, VerifyOptions};
use vvot::{bl, pde, simplex_distance, w_dynamic, wg_dynamic, DiscreteVectorMeasure, GridConfig, SimplexPoint, WeightedGraph};

use crate::{input, CliError, GraphArgs, PairArgs, SolverArgs};

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(p) = path {
        let w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(w, value).map_err(|e| CliError::Output(e.into()))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn pair(p: &PairArgs) -> Result<(DiscreteVectorMeasure, DiscreteVectorMeasure), CliError> {
    Ok((input::measure(&p.mu)?, input::measure(&p.nu)?))
}

pub fn wg(graph: &GraphArgs, p0: &[f64], p1: &[f64], solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let g = input::graph_or_two_node(graph.graph.as_ref())?;
    if p0.len() != g.n() || p1.len() != g.n() {
        return Err(CliError::Usage(format!(
            "--p0 and --p1 need {} entries each (one per node), got {} and {}",
            g.n(),
            p0.len(),
            p1.len()
        )));
    }
    let res = wg_dynamic(&g, &graph.theta, p0, p1, solver.time_steps, &solver.config())?;
    println!("{:.10}", res.distance);
    write_json(
        out,
        &json!({
            "distance": res.distance,
            "convergence": res.convergence,
            "times": res.path.times,
            "states": res.path.states,
        }),
    )
}

pub fn simplex_dist(
    graph: &GraphArgs,
    r0: &SimplexPoint,
    r1: &SimplexPoint,
    solver: &SolverArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let g = input::graph_or_two_node(graph.graph.as_ref())?;
    if r0.n() != g.n() || r1.n() != g.n() {
        return Err(CliError::Usage(format!("--r0 and --r1 need {} coordinates each", g.n() - 1)));
    }
    let d = simplex_distance(&g, &graph.theta, r0, r1, solver.time_steps, &solver.config())?;
    println!("{d:.10}");
    write_json(out, &json!({ "distance": d, "r0": r0, "r1": r1 }))
}

pub fn w2w(p: &PairArgs, graph: &GraphArgs, solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let g = input::graph_or_two_node(graph.graph.as_ref())?;
    let (mu, nu) = pair(p)?;
    let d_w = d_w_matrix(&g, &graph.theta, solver.time_steps, &solver.config())?;
    let res = vvot::static_ot::w2w(&mu, &nu, &d_w)?;
    println!("{:.10}", res.distance);
    write_json(out, &res)
}

fn joint_grid(mu: &DiscreteVectorMeasure, nu: &DiscreteVectorMeasure, padding: f64, cells: usize) -> vvot::Result<GridConfig> {
    let (a, b) = (mu.bounding_box(), nu.bounding_box());
    let (lo, hi) = (a[0].0.min(b[0].0), a[0].1.max(b[0].1));
    GridConfig::new(lo - padding, hi + padding, cells)
}

pub fn dynamic(
    p: &PairArgs,
    graph: &GraphArgs,
    grid: Option<&Path>,
    padding: f64,
    solver: &SolverArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let g = input::graph_or_two_node(graph.graph.as_ref())?;
    let (mu, nu) = pair(p)?;
    let grid = match grid {
        Some(path) => input::grid(path)?,
        None => joint_grid(&mu, &nu, padding, solver.grid_cells)?,
    };
    let res = w_dynamic(&g, &graph.theta, &mu, &nu, &grid, solver.time_steps, &solver.config())?;
    println!("{:.10}", res.distance);
    if !res.convergence.converged {
        eprintln!(
            "warning: not converged after {} iterations (primal {:.1e}, dual {:.1e})",
            res.convergence.iterations, res.convergence.primal_residual, res.convergence.dual_residual
        );
    }
    if let Some(dir) = out {
        res.solution.write_csv_slices(dir)?;
    }
    Ok(())
}

pub fn d_upper(p: &PairArgs, graph: &GraphArgs, subdivisions: usize, solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let g = input::graph_or_two_node(graph.graph.as_ref())?;
    let (mu, nu) = pair(p)?;
    let mut pts = simplex_grid(g.n(), subdivisions);
    let aggregate = |m: &DiscreteVectorMeasure| -> Vec<SimplexPoint> {
        m.atoms()
            .iter()
            .filter_map(|a| {
                let total = a.mass();
                (total > 0.0).then(|| a.w.iter().map(|w| w / total).collect::<Vec<_>>())
            })
            .filter_map(|w| SimplexPoint::from_distribution(&w).ok())
            .collect()
    };
    extend_grid(&mut pts, aggregate(&mu).into_iter().chain(aggregate(&nu)));
    let table = simplex_distance_matrix(&g, &graph.theta, &pts, solver.time_steps, &solver.config())?;
    let res = lifted_semimetric_upper(&mu, &nu, &pts, &table)?;
    println!("{:.10}", res.upper_bound);
    write_json(out, &res)
}

pub fn bl(p: &PairArgs, out: Option<&Path>) -> Result<(), CliError> {
    let (mu, nu) = pair(p)?;
    let d = bl::d_bl(&mu, &nu)?;
    println!("{d:.10}");
    write_json(out, &json!({ "d_bl": d, "components": bl::bl_components(&mu, &nu)? }))
}

fn chain_config(solver: &SolverArgs) -> ChainConfig {
    let mut cfg = ChainConfig { cells: solver.grid_cells, t_steps: solver.time_steps, ..ChainConfig::default() };
    cfg.solver.tol = solver.tol;
    cfg.solver.max_iter = solver.max_iter;
    cfg
}

pub fn chain(p: Option<&PairArgs>, random: usize, graph: &GraphArgs, solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = chain_config(solver);
    let f = &graph.theta;
    let reports = match p {
        Some(p) => {
            let g = input::graph_or_two_node(graph.graph.as_ref())?;
            let (mu, nu) = pair(p)?;
            vec![check_chain(&g, f, &mu, &nu, &cfg)?]
        }
        None => {
            let graphs = [WeightedGraph::two_node(1.0)?, WeightedGraph::complete(3, 1.0)?];
            let contexts = graphs.iter().map(|g| ChainContext::new(g, f, &cfg)).collect::<vvot::Result<Vec<_>>>()?;
            (0..random as u64)
                .map(|k| {
                    let (n, mu, nu) = random_instance(1000 * solver.seed + k, 4)?;
                    check_chain_with(&contexts[n - 2], &graphs[n - 2], f, &mu, &nu, &cfg)
                })
                .collect::<vvot::Result<Vec<_>>>()?
        }
    };
    let text = if p.is_some() { serde_json::to_string_pretty(&reports[0]) } else { serde_json::to_string_pretty(&reports) };
    println!("{}", text.map_err(|e| CliError::Output(e.into()))?);
    if p.is_some() {
        write_json(out, &reports[0])?;
    } else {
        write_json(out, &reports)?;
    }
    let failed = reports.iter().filter(|r| !r.ok).count();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} of {} instances violate the chain", reports.len())));
    }
    Ok(())
}

pub fn lot_embed(mu: &Path, atoms: usize, solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let mu = input::measure(mu)?;
    let reference = sample_reference(atoms, mu.n_species(), mu.dim(), solver.seed)?;
    let e = embed(&reference, &mu, SimplexCost::Euclidean)?;
    match out {
        Some(path) => write_embedding_csv(create(path)?, &e, &reference)?,
        None => write_embedding_csv(std::io::stdout().lock(), &e, &reference)?,
    }
    if e.non_injective {
        eprintln!("note: the optimal plan splits reference mass; values are barycentric averages");
    }
    Ok(())
}

pub fn lot_matrix(data: &Path, atoms: usize, solver: &SolverArgs, out: Option<&Path>) -> Result<(), CliError> {
    let data = input::dataset(data)?;
    let first = data.first().ok_or_else(|| CliError::Usage(format!("the dataset is empty; expected {}", input::DATASET_SCHEMA)))?;
    let reference = sample_reference(atoms, first.n_species(), first.dim(), solver.seed)?;
    let (m, _) = pairwise_matrix(&reference, &data, SimplexCost::Euclidean)?;
    match out {
        Some(path) => write_matrix_csv(create(path)?, &m)?,
        None => write_matrix_csv(std::io::stdout().lock(), &m)?,
    }
    Ok(())
}

pub fn pde_run(species: usize, q: f64, dt: f64, t_end: f64, snapshots: usize, out: Option<&Path>) -> Result<(), CliError> {
    if species == 0 || q < 0.0 || dt <= 0.0 || t_end <= 0.0 {
        return Err(CliError::Usage("need --species ≥ 1, --q ≥ 0, --dt > 0 and --t-end > 0".into()));
    }
    let mut cfg = pde::confinement_case(species, q);
    cfg.dt = dt;
    cfg.t_end = t_end;
    let init = pde::bump_state(&cfg);
    let times: Vec<f64> = (0..=snapshots).map(|k| t_end * k as f64 / snapshots.max(1) as f64).collect();
    let run = pde::run(&init, &cfg, &times, |_, _| {})?;
    let (first, last) = (&run.diagnostics[0], run.diagnostics.last().expect("initial row"));
    let mass = |d: &pde::Diagnostics| d.masses.iter().sum::<f64>();
    println!(
        "{} steps to t = {}: energy {:.10} -> {:.10}, mass {:.15} -> {:.15}, min density {:.3e}",
        run.steps.len(),
        last.time,
        first.energy,
        last.energy,
        mass(first),
        mass(last),
        last.min_rho
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        pde::write_trajectory_csv(create(&dir.join("trajectory.csv"))?, &run.trajectory, species)?;
        pde::write_diagnostics_csv(create(&dir.join("diagnostics.csv"))?, &run.diagnostics, species)?;
    }
    Ok(())
}

pub fn verify(suite: &str, seed: u64, chain_instances: usize, out: Option<&Path>) -> Result<(), CliError> {
    let suites = if suite.eq_ignore_ascii_case("all") {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse::<Suite>().map_err(|e| CliError::Usage(format!("{e}; or 'all'")))?]
    };
    let opts = VerifyOptions { seed, chain_instances, ..VerifyOptions::default() };
    let reports: Vec<_> = suites.into_iter().map(|s| verify_suite(s, &opts)).collect();
    for r in &reports {
        print!("{r}");
    }
    write_json(out, &reports)?;
    let failed: usize = reports.iter().map(|r| r.failures().count()).sum();
    if failed > 0 {
        return Err(CliError::CheckFailed(format!("{failed} checks failed")));
    }
    Ok(())
}
