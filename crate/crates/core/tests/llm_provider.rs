//! Chat-completion provider against a local mock endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use absynth::dsl::{Diagnostic, DiagnosticCode, Span};
use absynth::synth::{CandidateProvider, LlmConfig, LlmProvider, Repairer};

/// Serves `replies` to consecutive requests and forwards each request body.
fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut headers = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                headers.push_str(&line);
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            tx.send((headers, String::from_utf8(req).unwrap())).unwrap();
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1/chat/completions"), rx)
}

fn choices(texts: &[&str]) -> String {
    let choices: Vec<_> = texts
        .iter()
        .map(|t| serde_json::json!({"message": {"role": "assistant", "content": t}}))
        .collect();
    serde_json::json!({ "choices": choices }).to_string()
}

fn provider(endpoint: String) -> LlmProvider {
    LlmProvider::new(LlmConfig {
        endpoint,
        model: "mock".into(),
        api_key_env: "ABSYNTH_TEST_KEY_UNSET".into(),
        timeout_secs: 10,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn generate_posts_the_prompt_and_returns_choices() {
    let (url, rx) = serve(vec![(200, choices(&["one", "two", "three"]))]);
    let mut p = provider(url);
    let out = p.generate("make a transformer", 2);
    assert_eq!(out, vec!["one", "two"]);
    let (headers, body) = rx.recv().unwrap();
    assert!(headers.starts_with("POST /v1/chat/completions"));
    let req: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(req["model"], "mock");
    assert_eq!(req["n"], 2);
    assert_eq!(req["messages"][0]["content"], "make a transformer");
}

#[test]
fn server_errors_yield_no_candidates() {
    let (url, _rx) = serve(vec![(500, "{}".into())]);
    assert!(provider(url).generate("p", 3).is_empty());
}

#[test]
fn repair_extracts_the_fenced_block() {
    let fixed = "transformer deeppoly { Relu -> (0, 0, 0, 0); }";
    let (url, rx) = serve(vec![(
        200,
        choices(&[&format!("Here you go:\n```dsl\n{fixed}\n```")]),
    )]);
    let diag = Diagnostic::new(
        DiagnosticCode::UndefinedId,
        "undefined identifier `attr`",
        Span::new(3, 7),
    );
    let out = provider(url).repair("broken source", &[diag]);
    assert_eq!(out.trim(), fixed);
    let (_, body) = rx.recv().unwrap();
    let req: serde_json::Value = serde_json::from_str(&body).unwrap();
    let prompt = req["messages"][0]["content"].as_str().unwrap();
    assert!(prompt.contains("broken source") && prompt.contains("undefined identifier"));
}
