//! Shared helpers: load the bundled fixture corpus and retarget it at a
//! running mock so end-to-end scenarios stay fully offline.

use std::fs;
use std::path::{Path, PathBuf};

use blendkit::description::{parse_server_spec, serialize_server_spec, AuthSpec, ServerSpec};
use blendkit::mock::{start_mock, MockFixture, MockHandle};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn bundled_descriptions() -> Vec<(PathBuf, String)> {
    let apis = fixtures_dir().join("config/apis");
    let mut files: Vec<PathBuf> = fs::read_dir(&apis)
        .expect("bundled apis directory")
        .map(|entry| entry.expect("directory entry").path())
        .filter(|path| path.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).expect("fixture readable");
            (path, text)
        })
        .collect()
}

/// Start the mock serving every bundled platform stand-in.
pub fn start_platform_mock() -> MockHandle {
    let fixture = MockFixture::from_file(&fixtures_dir().join("mock/platforms.json"))
        .expect("bundled mock fixture");
    start_mock(fixture).expect("mock binds")
}

/// Point a parsed description at the mock: endpoint plus any absolute
/// authentication URLs.
pub fn retarget(spec: &ServerSpec, handle: &MockHandle) -> ServerSpec {
    let mut spec = spec.with_endpoint(&handle.host(), handle.port());
    match &mut spec.authentication {
        Some(AuthSpec::Simple {
            request_token_url, ..
        }) => {
            *request_token_url = rebase(request_token_url, handle);
        }
        Some(AuthSpec::OAuth2 {
            request_token_url,
            access_token_url,
            authorize_url,
            ..
        }) => {
            *request_token_url = rebase(request_token_url, handle);
            *access_token_url = rebase(access_token_url, handle);
            *authorize_url = rebase(authorize_url, handle);
        }
        None => {}
    }
    spec
}

fn rebase(url: &str, handle: &MockHandle) -> String {
    let path = url
        .split_once("://")
        .and_then(|(_, rest)| rest.split_once('/'))
        .map(|(_, path)| path)
        .unwrap_or("");
    format!("{}/{path}", handle.base_url())
}

/// Write a complete config directory (general.json plus retargeted
/// descriptions) under `dir`, ready for the CLI or `load_catalog`.
pub fn write_retargeted_config(dir: &Path, handle: &MockHandle) {
    let apis = dir.join("apis");
    fs::create_dir_all(&apis).expect("config directory");
    fs::copy(
        fixtures_dir().join("config/general.json"),
        dir.join("general.json"),
    )
    .expect("general.json copies");
    for (path, text) in bundled_descriptions() {
        let spec = parse_server_spec(&text)
            .unwrap_or_else(|errors| panic!("{} must parse: {errors:?}", path.display()));
        let retargeted = retarget(&spec, handle);
        fs::write(
            apis.join(path.file_name().expect("file name")),
            serialize_server_spec(&retargeted),
        )
        .expect("description writes");
    }
}
