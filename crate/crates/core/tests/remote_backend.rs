//! Remote guidance client against a tiny in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use relitex_core::guidance::wire::{self, WireRequest};
use relitex_core::guidance::{
    sample_noise, GuidanceBackend, GuidanceError, GuidanceRequest, GuidanceResponse, RemoteBackend,
};
use relitex_core::image::Image;

struct Received {
    path: String,
    body: String,
}

fn read_request(stream: &mut TcpStream) -> Received {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut len = 0;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).unwrap();
        if h == "\r\n" || h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    Received {
        path,
        body: String::from_utf8(body).unwrap(),
    }
}

fn respond(stream: &mut TcpStream, status: &str, body: &str) {
    let msg = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(msg.as_bytes()).unwrap();
}

/// Serves `n` connections with `handler`, recording what it saw.
fn serve(
    n: usize,
    handler: impl Fn(&Received) -> (String, String) + Send + 'static,
) -> (String, thread::JoinHandle<Vec<Received>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let req = read_request(&mut stream);
            let (status, body) = handler(&req);
            respond(&mut stream, &status, &body);
            seen.push(req);
        }
        seen
    });
    (url, handle)
}

/// Echo contract: generate returns the conditioning PNG, score returns the
/// noisy array unchanged.
fn echo(req: &Received) -> (String, String) {
    let wire: WireRequest = serde_json::from_str(&req.body).unwrap();
    let body = match req.path.as_str() {
        "/v1/generate" => serde_json::json!({ "image": wire.cond_image }),
        "/v1/score" => serde_json::json!({ "noise": wire.noisy_image.unwrap() }),
        _ => return ("404 Not Found".into(), r#"{"code":"not_found","message":"no route"}"#.into()),
    };
    ("200 OK".into(), body.to_string())
}

#[test]
fn echo_round_trip_is_bit_identical() {
    let (url, handle) = serve(2, echo);
    let backend = RemoteBackend::new(&url);
    let cond = sample_noise(16, 8, 3, 1).map(|v| (0.5 + 0.2 * v).clamp(0.0, 1.0));
    let noisy = sample_noise(16, 8, 3, 2);

    let gen = GuidanceRequest::generate("a medieval steel helmet", "", cond.clone(), 0.75, 5);
    let image = backend.generate(&gen).unwrap();
    let expect = wire::decode_png_base64(&wire::encode_png_base64(&cond).unwrap()).unwrap();
    assert_eq!(image, expect);

    let score = GuidanceRequest::score("a medieval steel helmet", "", cond, noisy.clone(), 0.05, 0.75, 5);
    let eps = backend.score(&score).unwrap();
    for (a, b) in eps.data.iter().zip(&noisy.data) {
        assert_eq!(*a, *b as f32 as f64);
    }

    let seen = handle.join().unwrap();
    assert_eq!(seen[0].path, "/v1/generate");
    assert_eq!(seen[1].path, "/v1/score");
    let json: serde_json::Value = serde_json::from_str(&seen[1].body).unwrap();
    assert_eq!(json["strength"], 0.75);
    assert_eq!(json["cfg_scale"], 50.0);
    assert_eq!(json["t"], 0.05);
    assert_eq!(json["mode"], "score");
    for key in ["prompt", "negative_prompt", "cond_image", "noisy_image", "seed"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn malformed_body_is_a_schema_error() {
    let (url, handle) = serve(2, |r| {
        if r.path == "/v1/score" {
            ("200 OK".into(), r#"{"noise": {"dtype": "float32", "shape": [2, 2], "data": ""}}"#.into())
        } else {
            ("200 OK".into(), "this is not json".into())
        }
    });
    let backend = RemoteBackend::new(&url);
    let cond = Image::filled(4, 4, 3, 0.5);
    let err = backend.generate(&GuidanceRequest::generate("p", "", cond.clone(), 1.0, 0)).unwrap_err();
    assert!(matches!(err, GuidanceError::Schema(_)), "{err:?}");
    let err = backend
        .score(&GuidanceRequest::score("p", "", cond.clone(), cond, 0.1, 1.0, 0))
        .unwrap_err();
    assert!(matches!(err, GuidanceError::Schema(_)), "{err:?}");
    handle.join().unwrap();
}

#[test]
fn wrong_shape_response_is_rejected() {
    let (url, handle) = serve(1, |_| {
        let noise = wire::encode_float_array(&Image::new(3, 4, 3));
        ("200 OK".into(), serde_json::json!({ "noise": noise }).to_string())
    });
    let cond = Image::filled(4, 4, 3, 0.5);
    let err = RemoteBackend::new(&url)
        .score(&GuidanceRequest::score("p", "", cond.clone(), cond, 0.1, 1.0, 0))
        .unwrap_err();
    assert!(matches!(err, GuidanceError::Shape(_)), "{err:?}");
    handle.join().unwrap();
}

#[test]
fn error_body_is_reported() {
    let (url, handle) = serve(1, |_| {
        ("422 Unprocessable Entity".into(), r#"{"code":"bad_strength","message":"strength out of range"}"#.into())
    });
    let err = RemoteBackend::new(&url)
        .call(&GuidanceRequest::generate("p", "", Image::new(4, 4, 3), 1.0, 0))
        .unwrap_err();
    match err {
        GuidanceError::Server { status, code, message } => {
            assert_eq!(status, 422);
            assert_eq!(code, "bad_strength");
            assert_eq!(message, "strength out of range");
        }
        other => panic!("{other:?}"),
    }
    handle.join().unwrap();
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        thread::sleep(Duration::from_millis(1500));
        drop(stream);
    });
    let backend = RemoteBackend::with_timeout(&url, Duration::from_millis(300));
    let err = backend
        .call(&GuidanceRequest::generate("p", "", Image::new(4, 4, 3), 1.0, 0))
        .unwrap_err();
    assert!(matches!(err, GuidanceError::Timeout(_)), "{err:?}");
    handle.join().unwrap();
}

#[test]
fn response_kinds_follow_the_mode() {
    let img = Image::filled(2, 2, 3, 0.25);
    let body = wire::encode_response(&GuidanceResponse::Noise(img.clone())).unwrap();
    let back = wire::decode_response(relitex_core::guidance::Mode::Score, &body).unwrap();
    assert_eq!(back, GuidanceResponse::Noise(img));
}
