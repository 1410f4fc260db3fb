//! SOAP-over-HTTP transport for the login harness.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Response, Server};
use wrapguard_core::xml::XmlDocument;
use wrapguard_core::xmldsig::{SignaturePolicy, SigningKey};

use crate::harness::{
    assertion_response, client_sign_challenge, extract_assertion, extract_challenge,
    extract_rejection, fault_response, Assertion, AuthService, Rejection,
};

pub const CHALLENGE_PATH: &str = "/LoginCreateChallenge";
pub const TOKEN_PATH: &str = "/LoginCreateToken";
const SOAP_CONTENT_TYPE: &str = "application/soap+xml; charset=utf-8";
const MAX_REQUEST: u64 = 1 << 20;

/// A server running on worker threads until [`RunningServer::shutdown`].
pub struct RunningServer {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until every worker has exited; only returns after shutdown
    /// from another thread or a fatal accept error.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        self.join();
    }
}

pub fn serve(
    service: Arc<AuthService>,
    addr: &str,
    threads: usize,
) -> Result<RunningServer, Box<dyn std::error::Error + Send + Sync>> {
    let server = Arc::new(Server::http(addr)?);
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or("server is not listening on an IP socket")?;
    let workers = (0..threads.max(1))
        .map(|_| {
            let server = server.clone();
            let service = service.clone();
            std::thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    handle(&service, request);
                }
            })
        })
        .collect();
    Ok(RunningServer {
        server,
        workers,
        addr,
    })
}

fn soap(status: u16, doc: &XmlDocument) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", SOAP_CONTENT_TYPE).expect("static header");
    Response::from_data(doc.serialize())
        .with_status_code(status)
        .with_header(header)
}

fn handle(service: &AuthService, mut request: tiny_http::Request) {
    let response = match (request.method(), request.url()) {
        (Method::Post, CHALLENGE_PATH) => soap(200, &service.login_create_challenge()),
        (Method::Post, TOKEN_PATH) => {
            let mut body = Vec::new();
            let read = request.as_reader().take(MAX_REQUEST).read_to_end(&mut body);
            let result = match read {
                Ok(_) => service.handle_token_request(&body),
                Err(e) => Err(Rejection::Malformed(e.to_string())),
            };
            match result {
                Ok(a) => soap(200, &assertion_response(&a)),
                Err(r) => soap(403, &fault_response(&r)),
            }
        }
        _ => Response::from_string("not found").with_status_code(404),
    };
    let _ = request.respond(response);
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("server rejected the request ({status}): {}", code.as_deref().unwrap_or("no reason given"))]
    Rejected { status: u16, code: Option<String> },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("signing the request: {0}")]
    Sign(#[from] wrapguard_core::xmldsig::SignError),
}

impl ClientError {
    pub fn rejection_code(&self) -> Option<&str> {
        match self {
            Self::Rejected { code, .. } => code.as_deref(),
            _ => None,
        }
    }
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').into(),
            agent: ureq::AgentBuilder::new().build(),
        }
    }

    fn post(&self, path: &str, body: &[u8]) -> Result<XmlDocument, ClientError> {
        let result = self
            .agent
            .post(&format!("{}{path}", self.base))
            .set("Content-Type", SOAP_CONTENT_TYPE)
            .send_bytes(body);
        let parse = |r: ureq::Response| -> Result<XmlDocument, ClientError> {
            let mut bytes = Vec::new();
            r.into_reader()
                .take(MAX_REQUEST)
                .read_to_end(&mut bytes)
                .map_err(|e| ClientError::Transport(e.to_string()))?;
            XmlDocument::parse(&bytes).map_err(|e| ClientError::Malformed(e.to_string()))
        };
        match result {
            Ok(r) => parse(r),
            Err(ureq::Error::Status(status, r)) => Err(ClientError::Rejected {
                status,
                code: parse(r).ok().as_ref().and_then(extract_rejection),
            }),
            Err(e) => Err(ClientError::Transport(e.to_string())),
        }
    }

    pub fn create_challenge(&self) -> Result<String, ClientError> {
        let doc = self.post(CHALLENGE_PATH, b"")?;
        extract_challenge(&doc).ok_or_else(|| ClientError::Malformed("no Challenge".into()))
    }

    pub fn create_token(&self, request: &XmlDocument) -> Result<Assertion, ClientError> {
        self.create_token_raw(&request.serialize())
    }

    pub fn create_token_raw(&self, request: &[u8]) -> Result<Assertion, ClientError> {
        let doc = self.post(TOKEN_PATH, request)?;
        extract_assertion(&doc).ok_or_else(|| ClientError::Malformed("no Assertion".into()))
    }

    /// Fetches a challenge, signs it with `key` and exchanges it.
    pub fn login<K: SigningKey>(
        &self,
        key: &K,
        policy: &SignaturePolicy,
    ) -> Result<Assertion, ClientError> {
        let challenge = self.create_challenge()?;
        let request = client_sign_challenge(&challenge, key, policy)?;
        self.create_token(&request)
    }
}
