use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scenegraph(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenegraph"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn converts_a_robot_to_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let urdf = fixtures().join("urdf/arm7.urdf");
    let usda = dir.path().join("arm.usda");
    ok(&scenegraph(&[&"convert", &urdf, &"-o", &usda]));
    assert!(std::fs::read_to_string(&usda).unwrap().starts_with("#usda 1.0"));

    for (to, root) in [("urdf", "<robot"), ("mjcf", "<mujoco"), ("sdf", "<sdf")] {
        let out = dir.path().join(format!("nested/arm.{to}"));
        ok(&scenegraph(&[&"convert", &urdf, &"-o", &out, &"--to", &to]));
        assert!(std::fs::read_to_string(&out).unwrap().contains(root), "{to}");
    }
}

#[test]
fn input_problems_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = scenegraph(&[
        &"convert",
        &dir.path().join("missing.urdf"),
        &"-o",
        &dir.path().join("x.usda"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let line = String::from_utf8_lossy(&out.stderr);
    let diag: serde_json::Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert_eq!(diag["severity"], "error");

    assert_eq!(scenegraph(&[&"query", &"x.nt"]).status.code(), Some(1));
    assert_eq!(scenegraph(&[&"frobnicate"]).status.code(), Some(1));
}

#[test]
fn refine_consolidates_fixed_links() {
    let dir = tempfile::tempdir().unwrap();
    let usda = dir.path().join("base.usda");
    ok(&scenegraph(&[
        &"convert",
        &fixtures().join("urdf/mobile_base.urdf"),
        &"-o",
        &usda,
    ]));
    let refined = dir.path().join("refined.usda");
    let summary = ok(&scenegraph(&[&"refine", &usda, &"-o", &refined, &"--consolidate"]));
    assert!(summary.contains("2 bodies consolidated"), "{summary}");
    let text = std::fs::read_to_string(&refined).unwrap();
    assert_eq!(text.matches("refine:consolidated_into = \"chassis\"").count(), 2);
    // Without the flag nothing is folded.
    let summary = ok(&scenegraph(&[&"refine", &usda]));
    assert!(summary.contains("0 bodies consolidated"), "{summary}");
}

#[test]
fn table_setting_pipeline_answers_every_question() {
    let dir = tempfile::tempdir().unwrap();
    let usda = dir.path().join("table.usda");
    let nt = dir.path().join("table.nt");
    let onto = fixtures().join("kg/table_setting.onto");
    ok(&scenegraph(&[
        &"convert",
        &fixtures().join("kg/table_setting.xml"),
        &"-o",
        &usda,
        &"--semantic-layer",
    ]));
    assert!(dir.path().join("table.semantic.usda").is_file());
    ok(&scenegraph(&[&"report", &usda]));
    ok(&scenegraph(&[
        &"label",
        &usda,
        &"--script",
        &fixtures().join("kg/table_setting.labels"),
    ]));
    ok(&scenegraph(&[&"kg", &usda, &"--ontology", &onto, &"-o", &nt]));

    let json = ok(&scenegraph(&[
        &"query",
        &nt,
        &"--ontology",
        &onto,
        &"--cq",
        &"1",
        &"--json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["X"] == "scene:World_cereal_box"));

    let knife = ok(&scenegraph(&[
        &"query",
        &nt,
        &"--ontology",
        &onto,
        &"--cq",
        &"3",
        &"--param",
        &"TOOL=dfl:knife.n",
    ]));
    assert!(knife.contains("scene:World_drawer"));
    // The labeled stage can be queried directly too.
    let direct = ok(&scenegraph(&[&"query", &usda, &"--ontology", &onto, &"--cq", &"4"]));
    assert!(direct.contains("scene:World_fridge"));
}

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(stage: &Path, write_back: bool) -> Server {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_scenegraph"));
    cmd.arg("serve").arg(stage).args(["--port", "0"]);
    if write_back {
        cmd.arg("--write-back");
    }
    let mut child = cmd.stdout(Stdio::piped()).stderr(Stdio::null()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .rsplit("http://")
        .next()
        .unwrap()
        .trim_end_matches('/')
        .to_string();
    Server { child, addr }
}

/// One request over a fresh connection; returns the status and body.
fn request(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

fn served_stage(dir: &Path) -> PathBuf {
    let usda = dir.join("scene.usda");
    ok(&scenegraph(&[
        &"convert",
        &fixtures().join("kg/table_setting.xml"),
        &"-o",
        &usda,
        &"--semantic-layer",
    ]));
    usda
}

#[test]
fn serve_hands_out_the_stage_and_its_layer() {
    let dir = tempfile::tempdir().unwrap();
    let usda = served_stage(dir.path());
    let server = start(&usda, false);
    let (status, body) = request(&server.addr, "GET", "/scene.usda", "");
    assert_eq!(status, 200);
    assert_eq!(body, std::fs::read_to_string(&usda).unwrap());
    let (status, body) = request(&server.addr, "GET", "/scene.semantic.usda", "");
    assert_eq!(status, 200);
    assert!(body.contains("over"));
    assert_eq!(request(&server.addr, "GET", "/../secret", "").0, 404);
    assert_eq!(request(&server.addr, "PUT", "/semantic-layer", "").0, 405);
}

#[test]
fn serve_accepts_valid_semantic_layers_only() {
    let dir = tempfile::tempdir().unwrap();
    let usda = served_stage(dir.path());
    let layer_path = dir.path().join("scene.semantic.usda");
    let original = std::fs::read_to_string(&layer_path).unwrap();
    let server = start(&usda, true);

    let tagged = original.replacen(
        "string[] semanticTag:semanticLabels = []",
        "string[] semanticTag:semanticLabels = [\"dfl:bowl.n\"]",
        1,
    );
    assert_ne!(tagged, original);
    assert_eq!(request(&server.addr, "PUT", "/semantic-layer", &tagged).0, 204);
    assert_eq!(std::fs::read_to_string(&layer_path).unwrap(), tagged);
    assert_eq!(request(&server.addr, "GET", "/scene.semantic.usda", "").1, tagged);

    let (status, body) = request(&server.addr, "PUT", "/semantic-layer", "def Xform \"World\" {\n}\n");
    assert_eq!(status, 400);
    assert!(serde_json::from_str::<serde_json::Value>(&body).unwrap()["errors"].is_array());
    assert_eq!(request(&server.addr, "PUT", "/semantic-layer", "not usda {").0, 400);
    assert_eq!(std::fs::read_to_string(&layer_path).unwrap(), tagged);

    assert_eq!(request(&server.addr, "POST", "/semantic-layer", "").0, 405);
    assert_eq!(request(&server.addr, "PUT", "/elsewhere", "").0, 404);
}
