//! API description documents: the data model, the parser, the canonical
//! serializer, and the name-keyed catalog.

mod canonical;
mod catalog;
mod parse;
mod types;

pub use canonical::serialize_server_spec;
pub use catalog::{load_catalog, Catalog, CatalogError};
pub use parse::{parse_server_spec, SpecError};
pub use types::{
    AuthSpec, ExtractionEntry, ExtractionMapping, InteractionSpec, MappingError, Method,
    ParameterSpec, PolicySpec, RequestTemplate, ResponseSpec, Scheme, ServerSpec, ValueType,
};
