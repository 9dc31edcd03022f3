use std::sync::Arc;

use heliomap_service::{Session, Workspace};

use crate::error::{CliError, CliResult};
use crate::{Context, ServeArgs};

/// Runs the labeling service until interrupted. Writes no run log; the
/// workspace journal is its record.
pub fn run(ctx: &mut Context, a: ServeArgs) -> CliResult<()> {
    let s = &mut ctx.cfg.serve;
    if let Some(h) = a.host {
        s.host = h;
    }
    if let Some(p) = a.port {
        s.port = p;
    }
    ctx.cfg.validate()?;
    let stage = ctx.cfg.serve.clone();
    let session = Arc::new(Session::open(Workspace::open(&a.workspace)?, stage.service())?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(format!("tokio runtime: {e}")))?;
    rt.block_on(async move {
        let addr = format!("{}:{}", stage.host, stage.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Io(format!("bind {addr}: {e}")))?;
        eprintln!("serving {} on http://{}", a.workspace.display(), listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?);
        tokio::select! {
            r = heliomap_service::serve(listener, session) => r.map_err(|e| CliError::Io(format!("server: {e}"))),
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })
}
