mod args;
mod figures;
mod run;

use std::process::ExitCode;

use clap::Parser;
use covcal::io::KeyValues;

use args::{Cli, Command, Common};
use run::{value_name, OutDir, Outcome};

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Calibrate(a) => &a.common,
        Command::Figure(a) => &a.common,
        Command::Sweep(a) => &a.common,
    }
}

fn manifest(cli: &Cli, argv: &[String], out: &OutDir, result: &Outcome<()>) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("version", env!("CARGO_PKG_VERSION"));
    kv.push("argv", argv.join(" "));
    match &cli.command {
        Command::Calibrate(a) => {
            kv.push("command", "calibrate");
            kv.push("algorithm", value_name(&a.algorithm));
            if let Some(t) = a.target {
                kv.push("target", t);
            }
        }
        Command::Figure(a) => {
            kv.push("command", "figure");
            kv.push("figure", value_name(&a.id));
            kv.push("vs", join(&a.vs));
            kv.push("rhos", join(&a.rhos));
            kv.push("points", a.points);
            kv.push("bin", a.bin);
            kv.push("phi", a.phi);
            kv.push("target", a.target);
        }
        Command::Sweep(a) => {
            kv.push("command", "sweep");
            kv.push("rho_grid", join(&a.rho_grid));
        }
    }
    kv.0.extend(common(&cli.command).settings().0);
    kv.push("files", out.files().join(" "));
    kv.push(
        "exit_code",
        match result {
            Ok(()) => 0,
            Err(f) => f.exit_code(),
        },
    );
    kv
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn main() -> ExitCode {
    let raw: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let argv: Vec<String> = raw.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let expanded = match args::expand_config(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(expanded);
    let mut out = match OutDir::create(&common(&cli.command).out) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("{f}");
            return ExitCode::from(f.exit_code());
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => run::calibrate(a, &mut out),
        Command::Figure(a) => figures::figure(a, &mut out),
        Command::Sweep(a) => run::sweep(a, &mut out),
    };
    let m = manifest(&cli, &argv, &out, &result);
    if let Err(e) = out.write("manifest.txt", m.to_text().as_bytes()) {
        eprintln!("{e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code())
        }
    }
}
