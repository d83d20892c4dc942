//! Command-line front door: validate descriptions, list the catalog,
//! perform one-off calls, run auth flows, and execute chain files.
//!
//! Exit codes are a stable contract: 0 success, 1 remote or logical
//! failure, 2 usage, spec, or I/O failure. Machine-readable output goes
//! to stdout; diagnostics go to stderr.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::chain::{parse_chain, run_chain, ChainResult, ChainStatus, StepOutcome};
use crate::clock::SystemClock;
use crate::config::load_general_config;
use crate::description::{load_catalog, AuthSpec, CatalogError};
use crate::request::SuppliedParameters;
use crate::session::{Blender, SessionError};
use crate::transport::ReqwestTransport;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "blendkit", version, about = "Declarative multi-API HTTP client")]
pub struct Cli {
    /// Directory holding general.json and the apis/ descriptions.
    #[arg(
        long,
        global = true,
        env = "BLENDKIT_CONFIG_DIR",
        default_value = "./config"
    )]
    config_dir: PathBuf,

    /// Envelope rendering on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Pretty)]
    output: OutputMode,

    /// Suppress progress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputMode {
    /// Indented JSON for reading.
    Pretty,
    /// One-line JSON for piping.
    RawEnvelope,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every description in the config directory.
    Validate,
    /// List servers and their interactions.
    List,
    /// Blend one interaction and print the result envelope.
    Call {
        server: String,
        interaction: String,
        /// Parameter as key=value; repeatable. Values are coerced to the
        /// declared type.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Parameter to omit even if it has a default; repeatable.
        #[arg(long = "param-null", value_name = "KEY")]
        param_null: Vec<String>,
    },
    /// Establish and cache credentials for a server.
    Auth {
        server: String,
        /// Redirect URI registered for the three-legged flow.
        #[arg(long, default_value = "urn:ietf:wg:oauth:2.0:oob")]
        redirect_uri: String,
    },
    /// Run a chain file.
    Chain {
        file: PathBuf,
        /// Write the full chain result to a file.
        #[arg(long, value_name = "PATH")]
        save: Option<PathBuf>,
    },
}

/// Parse arguments from the process environment and run. The returned
/// code is the process exit status.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Validate => cmd_validate(&cli),
        Command::List => cmd_list(&cli),
        Command::Call {
            server,
            interaction,
            params,
            param_null,
        } => cmd_call(&cli, server, interaction, params, param_null),
        Command::Auth {
            server,
            redirect_uri,
        } => cmd_auth(&cli, server, redirect_uri),
        Command::Chain { file, save } => cmd_chain(&cli, file, save.as_deref()),
    };
    ExitCode::from(code)
}

fn diag(cli: &Cli, message: &str) {
    if !cli.quiet {
        eprintln!("{message}");
    }
}

fn cmd_validate(cli: &Cli) -> u8 {
    match load_catalog(&cli.config_dir) {
        Ok(catalog) => {
            for server in catalog.servers() {
                println!(
                    "{}: {} interaction(s)",
                    server.name,
                    server.interactions.len()
                );
            }
            diag(
                cli,
                &format!("{} description(s) valid", catalog.len()),
            );
            EXIT_OK
        }
        Err(errors) => {
            let mut worst = EXIT_FAILURE;
            for error in &errors {
                match error {
                    CatalogError::Io { .. } => {
                        eprintln!("{error}");
                        worst = EXIT_USAGE;
                    }
                    CatalogError::Description { file, errors } => {
                        for spec_error in errors {
                            eprintln!("{}: {spec_error}", file.display());
                        }
                    }
                    CatalogError::DuplicateServerName { .. } => eprintln!("{error}"),
                }
            }
            worst
        }
    }
}

/// Load catalog and settings for the commands that need a working
/// configuration; failures are usage-level (exit 2).
fn open_blender(cli: &Cli) -> Result<Arc<Blender>, u8> {
    let catalog = match load_catalog(&cli.config_dir) {
        Ok(catalog) => catalog,
        Err(errors) => {
            for error in &errors {
                match error {
                    CatalogError::Description { file, errors } => {
                        for spec_error in errors {
                            eprintln!("{}: {spec_error}", file.display());
                        }
                    }
                    other => eprintln!("{other}"),
                }
            }
            return Err(EXIT_USAGE);
        }
    };
    let config = match load_general_config(&cli.config_dir) {
        Ok(config) => config,
        Err(error) => {
            eprintln!("{error}");
            return Err(EXIT_USAGE);
        }
    };
    let transport = match ReqwestTransport::new(
        Duration::from_secs(config.transport_timeout_seconds),
        &config.user_agent,
    ) {
        Ok(transport) => transport,
        Err(error) => {
            eprintln!("{error}");
            return Err(EXIT_USAGE);
        }
    };
    Ok(Arc::new(Blender::new(
        catalog,
        config,
        Box::new(transport),
        Arc::new(SystemClock::new()),
    )))
}

fn cmd_list(cli: &Cli) -> u8 {
    let blender = match open_blender(cli) {
        Ok(blender) => blender,
        Err(code) => return code,
    };
    match cli.output {
        OutputMode::RawEnvelope => {
            let listing: serde_json::Map<String, Value> = blender
                .catalog()
                .servers()
                .map(|server| {
                    let interactions: Vec<Value> = server
                        .interactions
                        .iter()
                        .map(|i| Value::String(i.name.clone()))
                        .collect();
                    (server.name.clone(), Value::Array(interactions))
                })
                .collect();
            println!("{}", Value::Object(listing));
        }
        OutputMode::Pretty => {
            for server in blender.catalog().servers() {
                println!("{}", server.name);
                for interaction in &server.interactions {
                    match &interaction.description {
                        Some(text) => println!("  {} - {text}", interaction.name),
                        None => println!("  {}", interaction.name),
                    }
                }
            }
        }
    }
    EXIT_OK
}

fn parse_cli_params(
    params: &[String],
    nulls: &[String],
) -> Result<SuppliedParameters, String> {
    let mut supplied = SuppliedParameters::new();
    for raw in params {
        let Some((key, value)) = raw.split_once('=') else {
            return Err(format!("--param {raw:?} is not of the form key=value"));
        };
        if key.is_empty() {
            return Err(format!("--param {raw:?} has an empty key"));
        }
        supplied.insert(key.to_owned(), Value::String(value.to_owned()));
    }
    for key in nulls {
        supplied.insert(key.clone(), Value::Null);
    }
    Ok(supplied)
}

fn cmd_call(
    cli: &Cli,
    server: &str,
    interaction: &str,
    params: &[String],
    param_null: &[String],
) -> u8 {
    let blender = match open_blender(cli) {
        Ok(blender) => blender,
        Err(code) => return code,
    };
    let supplied = match parse_cli_params(params, param_null) {
        Ok(supplied) => supplied,
        Err(message) => {
            eprintln!("{message}");
            return EXIT_USAGE;
        }
    };
    let mut session = blender.session();
    let result = session
        .load_server(server)
        .and_then(|()| session.load_interaction(interaction))
        .and_then(|()| session.set_parameters(supplied))
        .and_then(|()| session.blend());
    match result {
        Ok(envelope) => {
            print_envelope(cli, &serde_json::to_value(&envelope).expect("envelope serializes"));
            if envelope.is_success() {
                EXIT_OK
            } else {
                if let Some(error) = &envelope.error {
                    diag(cli, &format!("blend failed: {error}"));
                }
                EXIT_FAILURE
            }
        }
        Err(error) => {
            eprintln!("{error}");
            EXIT_USAGE
        }
    }
}

fn print_envelope(cli: &Cli, envelope: &Value) {
    match cli.output {
        OutputMode::Pretty => {
            println!(
                "{}",
                serde_json::to_string_pretty(envelope).expect("envelope serializes")
            );
        }
        OutputMode::RawEnvelope => {
            println!("{envelope}");
        }
    }
}

fn cmd_auth(cli: &Cli, server: &str, redirect_uri: &str) -> u8 {
    let blender = match open_blender(cli) {
        Ok(blender) => blender,
        Err(code) => return code,
    };
    let auth = match blender.catalog().get(server) {
        None => {
            eprintln!("unknown server {server:?}");
            return EXIT_USAGE;
        }
        Some(spec) => match &spec.authentication {
            None => {
                eprintln!("no authentication configured for {server:?}");
                return EXIT_USAGE;
            }
            Some(auth) => auth.clone(),
        },
    };
    let outcome = match auth {
        AuthSpec::Simple { .. } => blender.auth_simple(server),
        AuthSpec::OAuth2 { .. } => {
            let state = csrf_state();
            match blender.oauth2_begin(server, redirect_uri, &state) {
                Ok(url) => println!("{url}"),
                Err(error) => {
                    eprintln!("{error}");
                    return EXIT_USAGE;
                }
            }
            diag(cli, "visit the URL above, then paste the authorization code:");
            let mut code = String::new();
            if let Err(error) = std::io::stdin().lock().read_line(&mut code) {
                eprintln!("could not read the authorization code: {error}");
                return EXIT_USAGE;
            }
            let code = code.trim();
            if code.is_empty() {
                eprintln!("no authorization code supplied");
                return EXIT_USAGE;
            }
            blender.oauth2_complete(server, code, redirect_uri)
        }
    };
    match outcome {
        Ok(()) => {
            diag(cli, &format!("credentials cached for {server:?}"));
            EXIT_OK
        }
        Err(SessionError::AuthFlow { message }) => {
            eprintln!("authentication failed: {message}");
            EXIT_FAILURE
        }
        Err(error) => {
            eprintln!("{error}");
            EXIT_USAGE
        }
    }
}

/// A nonce for the authorize URL's state parameter.
fn csrf_state() -> String {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    format!("{nanos:x}-{:x}", std::process::id())
}

fn cmd_chain(cli: &Cli, file: &Path, save: Option<&Path>) -> u8 {
    let blender = match open_blender(cli) {
        Ok(blender) => blender,
        Err(code) => return code,
    };
    let document = match std::fs::read_to_string(file) {
        Ok(document) => document,
        Err(error) => {
            eprintln!("{}: {error}", file.display());
            return EXIT_USAGE;
        }
    };
    let chain = match parse_chain(&document, blender.catalog()) {
        Ok(chain) => chain,
        Err(errors) => {
            for error in errors {
                eprintln!("{}: {error}", file.display());
            }
            return EXIT_USAGE;
        }
    };
    let mut session = blender.session();
    let result = match run_chain(&chain, &mut session) {
        Ok(result) => result,
        Err(error) => {
            eprintln!("{error}");
            return EXIT_USAGE;
        }
    };
    match cli.output {
        OutputMode::Pretty => print_chain_summary(&result),
        OutputMode::RawEnvelope => {
            println!(
                "{}",
                serde_json::to_value(&result).expect("chain result serializes")
            );
        }
    }
    if let Some(path) = save {
        let text =
            serde_json::to_string_pretty(&result).expect("chain result serializes");
        if let Err(error) = std::fs::write(path, text + "\n") {
            eprintln!("{}: {error}", path.display());
            return EXIT_USAGE;
        }
        diag(cli, &format!("chain result written to {}", path.display()));
    }
    match &result.status {
        ChainStatus::Completed => EXIT_OK,
        ChainStatus::Aborted { step_id, reason } => {
            eprintln!("chain aborted at step {step_id:?}: {reason}");
            EXIT_FAILURE
        }
    }
}

fn print_chain_summary(result: &ChainResult) {
    let out = std::io::stdout();
    let mut out = out.lock();
    for step in &result.steps {
        let _ = write_step_summary(&mut out, step);
    }
    for (name, values) in &result.collections {
        let rendered: Vec<String> = values
            .iter()
            .map(|value| match value {
                Value::String(text) => text.clone(),
                other => other.to_string(),
            })
            .collect();
        let _ = writeln!(out, "collection {name} ({}): {}", values.len(), rendered.join(", "));
    }
}

fn write_step_summary(out: &mut impl Write, step: &StepOutcome) -> std::io::Result<()> {
    let failures = step.results.iter().filter(|r| !r.is_success()).count();
    writeln!(
        out,
        "step {}: {} blend(s), {} error(s)",
        step.step_id,
        step.results.len(),
        failures
    )?;
    for result in &step.results {
        let mut note = String::new();
        if let Some(Value::Object(map)) = &result.prepared_content {
            for (key, value) in map {
                if let Value::Array(items) = value {
                    note.push_str(&format!(" {key}={}", items.len()));
                }
            }
        }
        let status = match &result.error {
            None => "ok".to_owned(),
            Some(error) => format!("failed: {error}"),
        };
        writeln!(out, "  {} {} -> {status}{note}", result.request_summary.method, result.request_summary.url)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn params_parse_into_strings_and_nulls() {
        let supplied = parse_cli_params(
            &["q=good spirit".to_owned(), "page=2".to_owned()],
            &["rpp".to_owned()],
        )
        .unwrap();
        assert_eq!(supplied.get("q"), Some(&Value::String("good spirit".to_owned())));
        assert_eq!(supplied.get("page"), Some(&Value::String("2".to_owned())));
        assert_eq!(supplied.get("rpp"), Some(&Value::Null));
    }

    #[test]
    fn equals_in_the_value_is_preserved() {
        let supplied = parse_cli_params(&["q=a=b".to_owned()], &[]).unwrap();
        assert_eq!(supplied.get("q"), Some(&Value::String("a=b".to_owned())));
    }

    #[test]
    fn malformed_param_is_rejected() {
        assert!(parse_cli_params(&["no-equals".to_owned()], &[]).is_err());
        assert!(parse_cli_params(&["=value".to_owned()], &[]).is_err());
    }
}
