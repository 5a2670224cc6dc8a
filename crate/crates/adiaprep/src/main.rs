use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match adiaprep::cli::run(std::env::args_os()) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
        }
        Err(e) => {
            eprintln!("adiaprep: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
