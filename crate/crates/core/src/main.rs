use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use monofem::cli::{emit_table, parse_invocation, Invocation, CG_TOL_ENV};
use monofem::mesh::{build_uniform_mesh, Bounds};
use monofem::verification::convergence_study;
use monofem::Error;

fn write_output(path: Option<&std::path::Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    match parse_invocation(std::env::args())? {
        Invocation::Mesh { h, out } => {
            let mesh = build_uniform_mesh(Bounds::cardiac_square(), h)?;
            let mut buf = Vec::new();
            mesh.write_text(&mut buf)?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&buf))
        }
        Invocation::Info(text) => write_output(None, &text),
        Invocation::Study(mut cfg) => {
            cfg.apply_env_override(std::env::var(CG_TOL_ENV).ok().as_deref())?;
            if let Some(dir) = &cfg.dump_dir {
                std::fs::create_dir_all(dir)?;
            }
            let records = convergence_study(&cfg.study_config())?;
            let table = emit_table(&records, cfg.format)?;
            write_output(cfg.out.as_deref(), &table)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
