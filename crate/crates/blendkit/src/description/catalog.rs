//! Loading a directory of description files into a name-keyed catalog.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use super::parse::{parse_server_spec, SpecError};
use super::types::ServerSpec;

/// All loaded servers, keyed by their in-document name. Immutable after
/// load and safe to share between sessions.
#[derive(Debug, Clone)]
pub struct Catalog {
    servers: IndexMap<String, ServerSpec>,
    source_directory: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{file}: {} description error(s)", errors.len())]
    Description {
        file: PathBuf,
        errors: Vec<SpecError>,
    },
    #[error("duplicate server name {name:?} in {file} (already defined in {first_file})")]
    DuplicateServerName {
        name: String,
        file: PathBuf,
        first_file: PathBuf,
    },
}

impl Catalog {
    /// In-memory catalog, used by tests and by callers that assemble
    /// specs programmatically.
    pub fn from_servers(servers: Vec<ServerSpec>) -> Result<Catalog, CatalogError> {
        let mut keyed = IndexMap::new();
        for server in servers {
            if keyed.contains_key(&server.name) {
                return Err(CatalogError::DuplicateServerName {
                    name: server.name.clone(),
                    file: PathBuf::new(),
                    first_file: PathBuf::new(),
                });
            }
            keyed.insert(server.name.clone(), server);
        }
        Ok(Catalog {
            servers: keyed,
            source_directory: PathBuf::new(),
        })
    }

    pub fn get(&self, name: &str) -> Option<&ServerSpec> {
        self.servers.get(name)
    }

    pub fn servers(&self) -> impl Iterator<Item = &ServerSpec> {
        self.servers.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.servers.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.servers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.servers.is_empty()
    }

    pub fn source_directory(&self) -> &Path {
        &self.source_directory
    }
}

/// Load every `apis/*.json` file under `directory`. Errors are aggregated
/// across all files; the catalog is returned only when every file parsed
/// cleanly and no two files claim the same server name.
pub fn load_catalog(directory: &Path) -> Result<Catalog, Vec<CatalogError>> {
    if !directory.is_dir() {
        return Err(vec![CatalogError::Io {
            path: directory.to_owned(),
            message: "config directory does not exist".to_owned(),
        }]);
    }
    let apis = directory.join("apis");
    let mut files: Vec<PathBuf> = Vec::new();
    if apis.is_dir() {
        let entries = match fs::read_dir(&apis) {
            Ok(entries) => entries,
            Err(err) => {
                return Err(vec![CatalogError::Io {
                    path: apis,
                    message: err.to_string(),
                }])
            }
        };
        for entry in entries {
            match entry {
                Ok(entry) => {
                    let path = entry.path();
                    if path.extension().is_some_and(|ext| ext == "json") {
                        files.push(path);
                    }
                }
                Err(err) => {
                    return Err(vec![CatalogError::Io {
                        path: apis,
                        message: err.to_string(),
                    }])
                }
            }
        }
    }
    files.sort();

    let mut errors = Vec::new();
    let mut servers: IndexMap<String, (ServerSpec, PathBuf)> = IndexMap::new();
    for file in files {
        let text = match fs::read_to_string(&file) {
            Ok(text) => text,
            Err(err) => {
                errors.push(CatalogError::Io {
                    path: file,
                    message: err.to_string(),
                });
                continue;
            }
        };
        match parse_server_spec(&text) {
            Ok(spec) => {
                if let Some((_, first_file)) = servers.get(&spec.name) {
                    errors.push(CatalogError::DuplicateServerName {
                        name: spec.name.clone(),
                        file,
                        first_file: first_file.clone(),
                    });
                } else {
                    servers.insert(spec.name.clone(), (spec, file));
                }
            }
            Err(spec_errors) => errors.push(CatalogError::Description {
                file,
                errors: spec_errors,
            }),
        }
    }

    if errors.is_empty() {
        Ok(Catalog {
            servers: servers.into_iter().map(|(k, (spec, _))| (k, spec)).collect(),
            source_directory: directory.to_owned(),
        })
    } else {
        Err(errors)
    }
}
