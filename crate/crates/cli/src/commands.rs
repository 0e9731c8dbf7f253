//! Subcommand bodies.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ctm_core::dynamics::cluster_averages;
use ctm_core::network::{read_edge_list, read_thresholds};
use ctm_core::{
    branch_continuation, classify_pitchfork, classify_reduced, classify_trajectory, cluster_coherence,
    ctm_ltm_agreement, find_transition, gain_grid, lambda3_curve, negative_mean_initial_state, simulate,
    simulate_reduced, sweep_cluster_size, AgentSet, ClusterSizes, ConfigRecord, CtmError, CtmParams, InputSchedule,
    IntegratorConfig, Network, ReducedState, ReducedSystem, ResponseThresholds, Sigmoid, ThreeClusterSpec,
    Trajectory,
};
use serde_json::json;

use crate::config::{Profile, RunConfig};
use crate::error::{CliError, CliResult};
use crate::{Command, Figure};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// cluster sizes whose lambda3 curve `reproduce fig3` writes
const FIG3_CURVES: [usize; 6] = [20, 25, 27, 30, 35, 40];

pub fn execute(command: &Command, cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(format!("creating {}", cfg.out.display()), e))?;
    match command {
        Command::Simulate => simulate_cmd(cfg, Profile::Simulate, "trajectory.csv").map(|_| ()),
        Command::Reduce => reduce_cmd(cfg),
        Command::Bifurcate => bifurcate_cmd(cfg),
        Command::Sweep { .. } => sweep_cmd(cfg, Profile::Sweep, "sweep.csv"),
        Command::Branch { .. } => branch_cmd(cfg),
        Command::LtmCompare { .. } => ltm_cmd(cfg),
        Command::Reproduce { figure: Figure::Fig3 } => fig3(cfg),
        Command::Reproduce { figure: Figure::Fig5 } => fig5(cfg),
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let ctx = || format!("writing {}", path.display());
    let file = File::create(path).map_err(|e| CliError::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(ctx(), e))
}

fn write_json(path: &Path, header: &ConfigRecord, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, |w| {
        header.write_header(w)?;
        writeln!(w, "{text}")
    })
}

fn three_cluster(cfg: &RunConfig) -> CliResult<Network<f64>> {
    Ok(Network::three_cluster(&ThreeClusterSpec::new(cfg.total, cfg.n, cfg.eps))?)
}

fn params(cfg: &RunConfig) -> CtmParams<f64> {
    let mut p = CtmParams::feedback(cfg.u0, cfg.kappa, cfg.kappa_s).with_v(cfg.v);
    if let Some(u) = cfg.u {
        p.gain = ctm_core::GainMode::Fixed(u);
    }
    p.sigmoid = cfg.sigmoid;
    p
}

fn perturbed(cfg: &RunConfig) -> Option<usize> {
    (cfg.beta != 0.0).then_some(cfg.agent)
}

fn initial_state(cfg: &RunConfig) -> Vec<f64> {
    negative_mean_initial_state(cfg.total, perturbed(cfg), cfg.seed)
}

fn input(cfg: &RunConfig) -> InputSchedule<f64> {
    match perturbed(cfg) {
        Some(a) => InputSchedule::persistent(a, cfg.beta),
        None => InputSchedule::none(),
    }
}

fn simulate_cmd(cfg: &RunConfig, profile: Profile, file: &str) -> CliResult<(Network<f64>, Trajectory<f64>)> {
    let net = three_cluster(cfg)?;
    let integ = IntegratorConfig::rk4(cfg.dt, cfg.t_end);
    let mut traj = simulate(&net, &params(cfg), &initial_state(cfg), 0.0, &input(cfg), &integ)?;
    let mut header = cfg.header(profile);
    header.extend(&traj.config);
    traj.config = header;
    write_file(&cfg.out.join(file), |w| traj.write_csv(w))?;
    let class = classify_trajectory(&traj, &ResponseThresholds::default())?;
    say!("response: {:?}", class.kind);
    Ok((net, traj))
}

fn reduce_cmd(cfg: &RunConfig) -> CliResult<()> {
    let net = three_cluster(cfg)?;
    let sizes = ClusterSizes::new(cfg.total, cfg.n);
    let sys = ReducedSystem::new(sizes, cfg.eps, 0.0)?.with_agent_input(cfg.beta);
    let [y1, y2, y3] = cluster_averages(&net, &initial_state(cfg));
    let integ = IntegratorConfig::rk4(cfg.dt, cfg.t_end);
    let mut traj = simulate_reduced(&sys, &params(cfg), ReducedState::new(y1, y2, y3), 0.0, &integ)?;
    let mut header = cfg.header(Profile::Reduce);
    header.extend(&traj.config);
    traj.config = header;
    write_file(&cfg.out.join("reduced.csv"), |w| traj.write_csv(w))?;
    let class = classify_reduced(&traj, &ResponseThresholds::default())?;
    say!("response: {:?}", class.kind);
    Ok(())
}

fn require_tanh(cfg: &RunConfig) -> CliResult<()> {
    if cfg.sigmoid != Sigmoid::Tanh {
        return Err(CtmError::Usage(format!("closed-form analysis needs tanh, got {}", cfg.sigmoid.name())).into());
    }
    Ok(())
}

fn bifurcate_cmd(cfg: &RunConfig) -> CliResult<()> {
    require_tanh(cfg)?;
    let sizes = ClusterSizes::new(cfg.total, cfg.n);
    let report = find_transition::<f64>(sizes)?;
    let (pitchfork, pitchfork_error) = match classify_pitchfork(sizes, cfg.eps) {
        Ok(class) => (serde_json::to_value(class)?, serde_json::Value::Null),
        // no pitchfork or a degenerate one is a finding, not a failure
        Err(e @ (CtmError::Degenerate { .. } | CtmError::NoBifurcation(_))) => {
            (serde_json::Value::Null, json!(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let value = json!({
        "transition": report,
        "pitchfork": pitchfork,
        "pitchfork_error": pitchfork_error,
    });
    write_json(&cfg.out.join("bifurcation.json"), &cfg.header(Profile::Bifurcate), &value)?;
    say!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn sweep_cmd(cfg: &RunConfig, profile: Profile, file: &str) -> CliResult<()> {
    require_tanh(cfg)?;
    let rows = sweep_cluster_size::<f64>(cfg.total, cfg.n_min, cfg.resolved_n_max())?;
    let header = cfg.header(profile);
    write_file(&cfg.out.join(file), |w| ctm_core::bifurcation::write_sweep_csv(&rows, &header, w))?;
    match rows.iter().find(|r| r.exists) {
        Some(r) => say!("first n with a subcritical window: {}", r.n),
        None => say!("no subcritical window for n in {}..={}", cfg.n_min, cfg.resolved_n_max()),
    }
    Ok(())
}

fn branch_cmd(cfg: &RunConfig) -> CliResult<()> {
    let us = gain_grid(cfg.u_min, cfg.u_max, cfg.u_steps)?;
    let diagram = branch_continuation(ClusterSizes::new(cfg.total, cfg.n), cfg.eps, &us, cfg.beta)?;
    let header = cfg.header(Profile::Branch);
    write_file(&cfg.out.join("branch.csv"), |w| diagram.write_csv(&header, w))?;
    // with an input there is no symmetric branch to follow
    if cfg.beta == 0.0 {
        match diagram.symmetric_loss_of_stability()? {
            Some(u) => say!("principal branch loses stability near u = {u}"),
            None => say!("principal branch stable on the grid"),
        }
    }
    let empty = diagram.slices.iter().filter(|s| s.empty).count();
    say!("{} gain values, {empty} without a converged equilibrium", diagram.slices.len());
    Ok(())
}

fn open(path: &PathBuf) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn ltm_cmd(cfg: &RunConfig) -> CliResult<()> {
    let net = match (&cfg.edges, &cfg.thresholds) {
        (Some(e), Some(t)) => {
            let (size, edges) = read_edge_list(open(e)?)?;
            let thresholds = read_thresholds(open(t)?)?;
            Network::from_edges(size, &edges, thresholds)?
        }
        (None, None) => three_cluster(cfg)?,
        _ => return Err(CtmError::Usage("--edges and --thresholds go together".into()).into()),
    };
    let seeds: AgentSet = cfg.seeds.iter().copied().collect();
    let report = ctm_ltm_agreement(&net, &seeds, cfg.v, &IntegratorConfig::rk4(cfg.dt, cfg.t_end))?;
    let value = serde_json::to_value(&report)?;
    write_json(&cfg.out.join("ltm_compare.json"), &cfg.header(Profile::LtmCompare), &value)?;
    say!(
        "final sets match: {}, activation order admissible: {}, conclusive: {}",
        report.matches,
        report.switch_order_match,
        report.conclusive()
    );
    Ok(())
}

fn fig3(cfg: &RunConfig) -> CliResult<()> {
    sweep_cmd(cfg, Profile::Fig3, "fig3_sweep.csv")?;
    for n in FIG3_CURVES.into_iter().filter(|&n| cfg.total >= 2 * n + 2) {
        let curve = lambda3_curve::<f64>(ClusterSizes::new(cfg.total, n))?;
        let mut header = cfg.header(Profile::Fig3);
        header.set("curve_n", n);
        let path = cfg.out.join(format!("fig3_lambda3_n{n}.csv"));
        write_file(&path, |w| ctm_core::bifurcation::write_lambda3_csv(&curve, &header, w))?;
    }
    Ok(())
}

fn fig5(cfg: &RunConfig) -> CliResult<()> {
    let (net, traj) = simulate_cmd(cfg, Profile::Fig5, "fig5_trajectory.csv")?;
    let class = classify_trajectory(&traj, &ResponseThresholds::default())?;
    let exclude: AgentSet = perturbed(cfg).into_iter().collect();
    let coherence = cluster_coherence(&traj, &net, &exclude)?;
    let header = cfg.header(Profile::Fig5);
    write_file(&cfg.out.join("fig5_coherence.csv"), |w| coherence.write_csv(&header, w))?;
    let last = traj.final_state();
    let argmax = (0..last.len()).max_by(|&a, &b| last[a].total_cmp(&last[b]));
    let value = json!({
        "classification": class,
        "final_spread": coherence.final_spread(),
        "argmax_final_state": argmax,
    });
    write_json(&cfg.out.join("fig5_classification.json"), &header, &value)
}
