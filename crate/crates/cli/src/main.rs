mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::Ctx;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KINETIC_FRONT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("KINETIC_FRONT_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err("KINETIC_FRONT_THREADS must be a positive integer, got 0".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn name_and_module(cmd: &Command) -> (&'static str, &'static str) {
    match cmd {
        Command::Hamiltonian { .. } => ("hamiltonian", "hamiltonian"),
        Command::Speed { .. } => ("speed", "hamiltonian"),
        Command::Hj { .. } => ("hj", "hj_solver"),
        Command::Kinetic { .. } => ("kinetic", "kinetic_solver"),
        Command::Converge { .. } => ("converge", "kinetic_solver"),
        Command::Kolmogorov { .. } => ("kolmogorov", "unbounded_models"),
        Command::Nonlocal { .. } => ("nonlocal", "unbounded_models"),
    }
}

fn dispatch(ctx: &mut Ctx, cmd: &Command) -> anyhow::Result<()> {
    match cmd {
        Command::Hamiltonian { model, p_max } => commands::hamiltonian(ctx, model, *p_max)?,
        Command::Speed { model, p_max } => commands::speed(ctx, model, *p_max)?,
        Command::Hj { model, dx, t_final, cfl, x_max, init, snapshot_every, hopf_lax, p_max } => {
            commands::hj(ctx, model, *dx, *t_final, *cfl, *x_max, *init, *snapshot_every, *hopf_lax, *p_max)?
        }
        Command::Kinetic { model, eps, dx, t_final, cfl, x_max, init, snapshot_every } => {
            commands::kinetic(ctx, model, *eps, *dx, *t_final, *cfl, *x_max, *init, *snapshot_every)?
        }
        Command::Converge { model, eps, dx, t_final, cfl, x_max, init, margin } => {
            return commands::converge(ctx, model, eps, *dx, *t_final, *cfl, *x_max, *init, *margin)
        }
        Command::Kolmogorov { sigma, w, check } => return commands::kolmogorov(ctx, *sigma, *w, *check),
        Command::Nonlocal { kernel, kernel_file, p, check, log2_n, half_width, edge_tol, v_window } => {
            return commands::nonlocal(ctx, *kernel, kernel_file.as_deref(), *p, *check, *log2_n, *half_width, *edge_tol, *v_window)
        }
    }
    ctx.write_summary()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let (name, module) = name_and_module(&cli.command);
    let mut ctx = match Ctx::new(&cli.out, name) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let outcome = dispatch(&mut ctx, &cli.command);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("error: {module}: {e:#}"),
    };
    if let Err(e) = ctx.write_manifest(&status) {
        eprintln!("error: cannot write manifest: {e:#}");
        return ExitCode::from(1);
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {module}: {e:#}");
            ExitCode::from(1)
        }
    }
}
