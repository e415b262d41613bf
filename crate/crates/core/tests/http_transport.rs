//! The blocking HTTP transport against a local socket.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use lpconc::market_data::indexer::{
    fetch_pool_history_with, HttpTransport, IndexerConfig, TimeRange, Transport, TransportError,
};
use lpconc::Error;

struct Reply {
    status: u16,
    body: String,
}

/// Serves `replies` in order, one per connection, and records request
/// bodies.
fn serve(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/subgraph", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (reply, stream) in replies.into_iter().zip(listener.incoming()) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(String::from_utf8(body).unwrap());
            write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok(body: &str) -> Reply {
    Reply {
        status: 200,
        body: body.to_string(),
    }
}

#[test]
fn posts_json_and_reads_body() {
    let (url, seen) = serve(vec![ok(r#"{"data":1}"#)]);
    let t = HttpTransport::new(Duration::from_secs(5));
    assert_eq!(t.post_json(&url, r#"{"q":2}"#).unwrap(), r#"{"data":1}"#);
    assert_eq!(seen.lock().unwrap()[0], r#"{"q":2}"#);
}

#[test]
fn status_codes_surface() {
    let (url, _) = serve(vec![Reply {
        status: 503,
        body: String::new(),
    }]);
    let t = HttpTransport::new(Duration::from_secs(5));
    match t.post_json(&url, "{}") {
        Err(TransportError::Status(503)) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fetch_retries_server_errors() {
    let pool = r#"{"data":{"pool":{"feeTier":500,"token0":{"decimals":6},"token1":{"decimals":18}}}}"#;
    let hours = r#"{"data":{"poolHourDatas":[
        {"periodStartUnix":3600,"token0Price":"1500","token1Price":"0.000667","feeGrowthGlobal0X128":"10","feeGrowthGlobal1X128":"20"},
        {"periodStartUnix":7200,"token0Price":"1510","token1Price":"0.000662","feeGrowthGlobal0X128":"15","feeGrowthGlobal1X128":"26"}]}}"#;
    let (url, seen) = serve(vec![
        Reply {
            status: 502,
            body: String::new(),
        },
        ok(pool),
        Reply {
            status: 429,
            body: String::new(),
        },
        ok(hours),
    ]);
    let mut config = IndexerConfig::new(url);
    config.initial_backoff = Duration::from_millis(5);
    let data = fetch_pool_history_with(
        &HttpTransport::new(Duration::from_secs(5)),
        &config,
        "0xPOOL",
        TimeRange { start: 3600, end: 10_800 },
    )
    .unwrap();
    assert_eq!(data.len(), 2);
    assert_eq!(data.rows()[1].price, 1510.0);
    assert_eq!(data.meta().decimals_x, 18);
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 4);
    assert!(bodies[3].contains("0xpool"));
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut config = IndexerConfig::new(format!("http://127.0.0.1:{port}/"));
    config.max_retries = 1;
    config.initial_backoff = Duration::from_millis(1);
    let err = fetch_pool_history_with(
        &HttpTransport::new(Duration::from_secs(2)),
        &config,
        "0xabc",
        TimeRange { start: 0, end: 3600 },
    )
    .unwrap_err();
    assert!(matches!(err, Error::Network(_)), "{err}");
    assert!(err.is_environmental());
}
