//! End-to-end tour against the bundled stand-in platforms: start the mock,
//! aim the bundled descriptions at it, run one authenticated blend and the
//! search-then-fan-out chain, and print what came back.
//!
//! Run with: cargo run --example mock_playground

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use blendkit::chain::{parse_chain, run_chain};
use blendkit::clock::SystemClock;
use blendkit::config::GeneralConfig;
use blendkit::description::{parse_server_spec, AuthSpec, Catalog, ServerSpec};
use blendkit::mock::{start_mock, MockFixture, MockHandle};
use blendkit::session::Blender;
use blendkit::transport::ReqwestTransport;

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"))
}

/// Point a description at the local stand-in: endpoint plus any absolute
/// authentication URLs.
fn retarget(spec: ServerSpec, handle: &MockHandle) -> ServerSpec {
    let rebase = |url: &str| {
        let path = url
            .split_once("://")
            .and_then(|(_, rest)| rest.split_once('/'))
            .map(|(_, path)| path)
            .unwrap_or("");
        format!("{}/{path}", handle.base_url())
    };
    let mut spec = spec.with_endpoint(&handle.host(), handle.port());
    match &mut spec.authentication {
        Some(AuthSpec::Simple {
            request_token_url, ..
        }) => *request_token_url = rebase(request_token_url),
        Some(AuthSpec::OAuth2 {
            request_token_url,
            access_token_url,
            authorize_url,
            ..
        }) => {
            *request_token_url = rebase(request_token_url);
            *access_token_url = rebase(access_token_url);
            *authorize_url = rebase(authorize_url);
        }
        None => {}
    }
    spec
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let handle = start_mock(MockFixture::from_file(
        &fixtures().join("mock/platforms.json"),
    )?)?;
    println!("stand-in platforms listening on {}", handle.base_url());

    let mut servers = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(fixtures().join("config/apis"))?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        let spec = parse_server_spec(&fs::read_to_string(&path)?)
            .map_err(|errors| format!("{}: {errors:?}", path.display()))?;
        servers.push(retarget(spec, &handle));
    }

    let scratch = tempfile::tempdir()?;
    let catalog = Catalog::from_servers(servers)?;
    let config = GeneralConfig::defaults(scratch.path());
    let transport = ReqwestTransport::new(Duration::from_secs(10), &config.user_agent)?;
    let blender = Arc::new(Blender::new(
        catalog,
        config,
        Box::new(transport),
        Arc::new(SystemClock::new()),
    ));

    // One blend against the token-guarded photo service: the session
    // fetches and caches the token on its own.
    let mut session = blender.session();
    session.load_server("photo-service")?;
    session.load_interaction("recent")?;
    let result = session.blend()?;
    println!("\nphoto-service recent -> {:?}", result.status_code);
    println!("  request: {} {}", result.request_summary.method, result.request_summary.url);
    if let Some(parsed) = &result.parsed_content {
        println!("  photos: {}", parsed["photos"].as_array().map_or(0, Vec::len));
    }

    // The fan-out chain: search two pages, collect distinct users, then
    // fetch followers and followees for each.
    let chain_text = fs::read_to_string(fixtures().join("chains/good-spirit.json"))?;
    let spec = parse_chain(&chain_text, blender.catalog())
        .map_err(|errors| format!("chain: {errors:?}"))?;
    let mut chain_session = blender.session();
    let outcome = run_chain(&spec, &mut chain_session)?;

    println!("\nchain status: {:?}", outcome.status);
    for step in &outcome.steps {
        println!("  step {}: {} blend(s)", step.step_id, step.results.len());
    }
    for (name, values) in &outcome.collections {
        let rendered: Vec<String> = values
            .iter()
            .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_owned))
            .collect();
        println!("  collection {name}: [{}]", rendered.join(", "));
    }
    println!("\nthe stand-in served {} requests in total", handle.request_count());
    Ok(())
}
