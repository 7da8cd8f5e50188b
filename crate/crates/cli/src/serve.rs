//! Static file server for the tagging UI.
//!
//! `GET /scene.usda` and `GET /scene.semantic.usda` return the served stage
//! and its semantic layer whatever their names on disk. Other paths come
//! from the static directory, then from the stage's directory (meshes).
//! With `--write-back`, `PUT /semantic-layer` validates the body and
//! atomically replaces the semantic layer file.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use scenegraph_core::usda::{self, check_semantic_layer, load_composed, semantic_layer_path, write_atomic};
use scenegraph_core::Diagnostic;
use tiny_http::{Header, Method, Response, Server};

use crate::config::Config;
use crate::{print_diagnostics, user, ServeArgs};

const WORKERS: usize = 4;
const MAX_LAYER_BYTES: u64 = 64 << 20;

pub struct ServeState {
    pub stage: PathBuf,
    pub semantic: PathBuf,
    pub static_dir: Option<PathBuf>,
    pub write_back: bool,
    write_lock: Mutex<()>,
}

impl ServeState {
    pub fn new(stage: PathBuf, static_dir: Option<PathBuf>, write_back: bool) -> Self {
        Self {
            semantic: semantic_layer_path(&stage),
            stage,
            static_dir,
            write_back,
            write_lock: Mutex::new(()),
        }
    }
}

#[derive(Debug)]
pub struct Reply {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
    pub allow: Option<&'static str>,
}

impl Reply {
    fn new(status: u16, content_type: &'static str, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            content_type,
            body: body.into(),
            allow: None,
        }
    }

    fn text(status: u16, message: &str) -> Self {
        Self::new(status, "text/plain; charset=utf-8", format!("{message}\n"))
    }

    fn json(status: u16, value: serde_json::Value) -> Self {
        Self::new(status, "application/json", format!("{value}\n"))
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or_default() {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript",
        "css" => "text/css",
        "json" => "application/json",
        "usda" | "obj" | "mtl" | "txt" | "tsv" => "text/plain; charset=utf-8",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "svg" => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

/// Relative path below a served root, or None for anything that could escape it.
fn safe_relative(url_path: &str) -> Option<PathBuf> {
    let rel = url_path.trim_start_matches('/');
    if rel.is_empty() || rel.contains('\\') || rel.contains('\0') {
        return None;
    }
    let mut out = PathBuf::new();
    for part in rel.split('/') {
        if part.is_empty() || part == "." || part == ".." {
            return None;
        }
        out.push(part);
    }
    Some(out)
}

fn file_reply(path: &Path) -> Option<Reply> {
    let bytes = std::fs::read(path).ok()?;
    Some(Reply::new(200, content_type(path), bytes))
}

fn index_page(state: &ServeState) -> Reply {
    let name = |p: &Path| p.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let html = format!(
        "<!doctype html>\n<title>scenegraph</title>\n<ul>\n<li><a href=\"/scene.usda\">{}</a></li>\n<li><a href=\"/scene.semantic.usda\">{}</a></li>\n</ul>\n",
        name(&state.stage),
        name(&state.semantic)
    );
    Reply::new(200, "text/html; charset=utf-8", html)
}

fn get(state: &ServeState, url_path: &str) -> Reply {
    let not_found = || Reply::text(404, "not found");
    let stage_name = state.stage.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let sem_name = state.semantic.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let rel = url_path.trim_start_matches('/');
    if rel == "scene.usda" || rel == stage_name {
        return file_reply(&state.stage).unwrap_or_else(not_found);
    }
    if rel == "scene.semantic.usda" || rel == sem_name {
        return file_reply(&state.semantic).unwrap_or_else(not_found);
    }
    if rel.is_empty() {
        return state
            .static_dir
            .as_ref()
            .and_then(|d| file_reply(&d.join("index.html")))
            .unwrap_or_else(|| index_page(state));
    }
    let Some(rel) = safe_relative(url_path) else {
        return not_found();
    };
    let stage_dir = state.stage.parent().map(Path::to_path_buf);
    state
        .static_dir
        .iter()
        .chain(stage_dir.iter())
        .find_map(|root| file_reply(&root.join(&rel)))
        .unwrap_or_else(not_found)
}

fn put_semantic_layer(state: &ServeState, body: &[u8]) -> Reply {
    let Ok(text) = std::str::from_utf8(body) else {
        return Reply::json(400, serde_json::json!({ "errors": ["body is not UTF-8"] }));
    };
    let layer = match usda::parse(text) {
        Ok(l) => l,
        Err(e) => return Reply::json(400, serde_json::json!({ "errors": [e.to_string()] })),
    };
    let _guard = state.write_lock.lock().unwrap_or_else(|e| e.into_inner());
    let scene = match load_composed(&state.stage) {
        Ok(s) => s,
        Err(e) => return Reply::json(500, serde_json::json!({ "errors": [e.to_string()] })),
    };
    let problems = check_semantic_layer(&layer, &scene);
    if !problems.is_empty() {
        return Reply::json(400, serde_json::json!({ "errors": problems }));
    }
    match write_atomic(&state.semantic, text) {
        Ok(()) => Reply::new(204, "text/plain", Vec::new()),
        Err(e) => Reply::json(500, serde_json::json!({ "errors": [e.to_string()] })),
    }
}

/// Answers one request.
pub fn route(state: &ServeState, method: &str, url: &str, body: &[u8]) -> Reply {
    let path = url.split(['?', '#']).next().unwrap_or_default();
    match method {
        "GET" | "HEAD" => get(state, path),
        "PUT" if state.write_back && path == "/semantic-layer" => put_semantic_layer(state, body),
        "PUT" if state.write_back => Reply::text(404, "only /semantic-layer accepts PUT"),
        _ => {
            let allow = if state.write_back && path == "/semantic-layer" {
                "GET, HEAD, PUT"
            } else {
                "GET, HEAD"
            };
            let mut r = Reply::text(405, "method not allowed");
            r.allow = Some(allow);
            r
        }
    }
}

fn handle(state: &ServeState, mut req: tiny_http::Request) {
    let method = req.method().as_str().to_string();
    let url = req.url().to_string();
    let mut body = Vec::new();
    if *req.method() == Method::Put {
        let mut limited = req.as_reader().take(MAX_LAYER_BYTES + 1);
        if limited.read_to_end(&mut body).is_err() {
            let _ = req.respond(Response::from_string("cannot read body\n").with_status_code(400));
            return;
        }
        if body.len() as u64 > MAX_LAYER_BYTES {
            let _ = req.respond(Response::from_string("body too large\n").with_status_code(413));
            return;
        }
    }
    let reply = route(state, &method, &url, &body);
    let mut resp =
        Response::from_data(if method == "HEAD" { Vec::new() } else { reply.body }).with_status_code(reply.status);
    if let Ok(h) = Header::from_bytes("Content-Type", reply.content_type) {
        resp = resp.with_header(h);
    }
    if let Some(allow) = reply.allow {
        if let Ok(h) = Header::from_bytes("Allow", allow) {
            resp = resp.with_header(h);
        }
    }
    let _ = req.respond(resp);
}

pub fn serve(a: ServeArgs, config: &Config) -> Result<()> {
    if !a.stage.is_file() {
        return Err(user(format!("stage not found: {}", a.stage.display())));
    }
    let static_dir = config.or_path(a.static_dir, "static");
    if let Some(d) = &static_dir {
        if !d.is_dir() {
            return Err(user(format!("static directory not found: {}", d.display())));
        }
    }
    let port = config.or_value(a.port, "port").map_err(user)?.unwrap_or(8080);
    let state = Arc::new(ServeState::new(a.stage.clone(), static_dir, a.write_back));
    if a.write_back {
        let raw = std::fs::read_to_string(&a.stage).with_context(|| format!("cannot read {}", a.stage.display()))?;
        let top = usda::parse(&raw).map_err(|e| user(format!("{}: {e}", a.stage.display())))?;
        let sem_name = state.semantic.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        if !top.sublayers().iter().any(|l| l.trim_start_matches("./") == sem_name) {
            print_diagnostics(&[Diagnostic::warning(
                "semantic-layer-not-referenced",
                format!(
                    "{} does not list {sem_name} as a sublayer; saved labels will not compose",
                    a.stage.display()
                ),
            )]);
        }
    }
    let server =
        Server::http((a.host.as_str(), port)).map_err(|e| user(format!("cannot listen on {}:{port}: {e}", a.host)))?;
    let addr = server
        .server_addr()
        .to_ip()
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("{}:{port}", a.host));
    println!("serving {} on http://{addr}/", a.stage.display());
    std::io::stdout().flush().ok();
    let server = Arc::new(server);
    let workers: Vec<_> = (0..WORKERS)
        .map(|_| {
            let server = Arc::clone(&server);
            let state = Arc::clone(&state);
            std::thread::spawn(move || {
                while let Ok(req) = server.recv() {
                    handle(&state, req);
                }
            })
        })
        .collect();
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = "#usda 1.0\n\ndef Xform \"World\"\n{\n    def Xform \"Cup\"\n    {\n    }\n}\n";
    const LAYER: &str = "#usda 1.0\n\nover \"World\"\n{\n    over \"Cup\" (\n        prepend apiSchemas = [\"SemanticTagAPI\"]\n    )\n    {\n        string[] semanticTag:semanticLabels = [\"dfl:cup.n\"]\n    }\n}\n";

    fn setup(write_back: bool) -> (tempfile::TempDir, ServeState) {
        let dir = tempfile::tempdir().unwrap();
        let stage = dir.path().join("kitchen.usda");
        std::fs::write(&stage, SCENE).unwrap();
        std::fs::write(dir.path().join("cup.obj"), "v 0 0 0\n").unwrap();
        let state = ServeState::new(stage, None, write_back);
        (dir, state)
    }

    #[test]
    fn serves_stage_and_side_files() {
        let (_d, s) = setup(false);
        let r = route(&s, "GET", "/scene.usda", b"");
        assert_eq!((r.status, r.body.as_slice()), (200, SCENE.as_bytes()));
        assert_eq!(route(&s, "GET", "/kitchen.usda?x=1", b"").status, 200);
        assert_eq!(route(&s, "GET", "/cup.obj", b"").status, 200);
        assert_eq!(route(&s, "GET", "/scene.semantic.usda", b"").status, 404);
        assert_eq!(route(&s, "GET", "/../etc/passwd", b"").status, 404);
        assert_eq!(route(&s, "GET", "/", b"").status, 200);
    }

    #[test]
    fn put_needs_write_back() {
        let (_d, s) = setup(false);
        let r = route(&s, "PUT", "/semantic-layer", LAYER.as_bytes());
        assert_eq!(r.status, 405);
        assert_eq!(r.allow, Some("GET, HEAD"));
        assert!(!s.semantic.exists());
        assert_eq!(route(&s, "DELETE", "/scene.usda", b"").status, 405);
    }

    #[test]
    fn put_validates_before_writing() {
        let (_d, s) = setup(true);
        assert_eq!(route(&s, "PUT", "/semantic-layer", LAYER.as_bytes()).status, 204);
        assert_eq!(std::fs::read_to_string(&s.semantic).unwrap(), LAYER);
        for bad in [
            "#usda 1.0\nover \"World\" {".to_string(),
            LAYER.replace("Cup", "Plate"),
            LAYER.replace("semanticTag:semanticLabels", "xformOp:translate"),
        ] {
            let r = route(&s, "PUT", "/semantic-layer", bad.as_bytes());
            assert_eq!(r.status, 400, "{bad}");
            assert_eq!(std::fs::read_to_string(&s.semantic).unwrap(), LAYER);
        }
        assert_eq!(route(&s, "PUT", "/scene.usda", b"").status, 404);
    }
}
