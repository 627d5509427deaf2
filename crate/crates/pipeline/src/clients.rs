use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use cinepipe_core::clients::http::HttpBackend;
use cinepipe_core::clients::mock::MockBackend;
use cinepipe_core::clients::{ArtifactStore, Backend, EndpointRegistry, GenClient, GenKind, ModelEndpoint};
use cinepipe_core::storyboard::RoutingTable;

use crate::config::PipelineConfig;
use crate::PipelineError;

/// Produces the backend serving one endpoint.
pub type BackendFactory = dyn Fn(&ModelEndpoint) -> Arc<dyn Backend> + Send + Sync;

/// Mock for endpoints without a URL (or with the literal `mock`), HTTP otherwise.
pub fn default_backend(endpoint: &ModelEndpoint) -> Arc<dyn Backend> {
    if endpoint.base_url.is_empty() || endpoint.base_url == "mock" {
        Arc::new(MockBackend::default())
    } else {
        Arc::new(HttpBackend)
    }
}

#[derive(Debug)]
pub struct Clients {
    pub storyteller: GenClient,
    pub cinematographer: GenClient,
    pub judges: Vec<GenClient>,
    pub t2i: GenClient,
    /// Image-edit clients keyed by model id.
    pub i2i: BTreeMap<String, GenClient>,
    pub flf2v: GenClient,
    pub guided: GenClient,
}

impl Clients {
    pub fn build(
        cfg: &PipelineConfig,
        store: &ArtifactStore,
        routing: &RoutingTable,
        backend_for: &BackendFactory,
    ) -> Result<Self, PipelineError> {
        let registry = EndpointRegistry::from_endpoints(cfg.endpoint.clone())?;
        let make = |id: &str, kind: GenKind| -> Result<GenClient, PipelineError> {
            let endpoint = match registry.get(id) {
                Ok(ep) if ep.kind == kind => ep.clone(),
                Ok(ep) => {
                    return Err(PipelineError::Config(format!(
                        "model {id:?} is registered as {}, but is used as {kind}",
                        ep.kind
                    )))
                }
                Err(_) if cfg.mock => ModelEndpoint::new(id, kind),
                Err(e) => return Err(e.into()),
            };
            let backend = backend_for(&endpoint);
            Ok(GenClient::new(endpoint, backend, store.clone(), cfg.retry))
        };
        let m = &cfg.models;
        let pool: BTreeSet<String> = if m.i2i.is_empty() {
            routing.assignment.values().cloned().collect()
        } else {
            m.i2i.iter().cloned().collect()
        };
        Ok(Self {
            storyteller: make(&m.storyteller, GenKind::Llm)?,
            cinematographer: make(&m.cinematographer, GenKind::Llm)?,
            judges: m.judges.iter().map(|j| make(j, GenKind::Llm)).collect::<Result<_, _>>()?,
            t2i: make(&m.t2i, GenKind::T2i)?,
            i2i: pool.into_iter().map(|id| make(&id, GenKind::I2i).map(|c| (id, c))).collect::<Result<_, _>>()?,
            flf2v: make(&m.flf2v, GenKind::Flf2v)?,
            guided: make(&m.guided, GenKind::GuidedInterp)?,
        })
    }
}
